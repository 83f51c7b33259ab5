#pragma once

// Convenience header pulling in the whole library.

#include "dmjc/assignment.hpp"
#include "dmjc/autoencoder.hpp"
#include "dmjc/config.hpp"
#include "dmjc/dec.hpp"
#include "dmjc/dmjc_s.hpp"
#include "dmjc/dmjc_t.hpp"
#include "dmjc/error.hpp"
#include "dmjc/io.hpp"
#include "dmjc/kmeans.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/metrics.hpp"
#include "dmjc/optimizer.hpp"
#include "dmjc/pipeline.hpp"
#include "dmjc/rng.hpp"
#include "dmjc/simplex.hpp"
#include "dmjc/synthetic.hpp"
#include "dmjc/training.hpp"
