#pragma once

#include "icc/contrastive/kmeans.hpp"
#include "icc/contrastive/loss.hpp"
#include "icc/contrastive/sampling.hpp"
#include "icc/contrastive/sets.hpp"
#include "icc/data/io.hpp"
#include "icc/data/synth.hpp"
#include "icc/data/transforms.hpp"
#include "icc/metrics/report.hpp"
#include "icc/metrics/segments.hpp"
#include "icc/network/backbone.hpp"
#include "icc/network/checkpoint.hpp"
#include "icc/network/heads.hpp"
#include "icc/network/multires.hpp"
#include "icc/network/probe.hpp"
#include "icc/train/icc.hpp"
