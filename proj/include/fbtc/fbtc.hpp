#pragma once

// Umbrella header: trajectory measures and parameter-free spectral
// clustering for longitudinal data.

#include "fbtc/csv.hpp"
#include "fbtc/error.hpp"
#include "fbtc/evaluate.hpp"
#include "fbtc/features.hpp"
#include "fbtc/measures.hpp"
#include "fbtc/parallel.hpp"
#include "fbtc/partition.hpp"
#include "fbtc/pipeline.hpp"
#include "fbtc/rng.hpp"
#include "fbtc/similarity.hpp"
#include "fbtc/spectral.hpp"
#include "fbtc/synthetic.hpp"
#include "fbtc/trajectory.hpp"
