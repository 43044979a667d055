#pragma once

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/random.hpp"
#include "sim/dynamics.hpp"
#include "sim/lane_change.hpp"
#include "sim/simulation.hpp"
#include "sim/trace_io.hpp"
#include "sim/vehicle.hpp"
#include "scenario/detect.hpp"
#include "scenario/dtw.hpp"
#include "scenario/features.hpp"
#include "scenario/zones.hpp"
#include "forest/noise.hpp"
#include "forest/proximity.hpp"
#include "forest/unsupervised_forest.hpp"
#include "ordering/heatmap.hpp"
#include "ordering/linkage.hpp"
#include "ordering/optimal_leaf_order.hpp"
#include "ordering/seriation.hpp"
#include "classify/supervised_forest.hpp"
#include "classify/thresholds.hpp"
#include "pipeline.hpp"
