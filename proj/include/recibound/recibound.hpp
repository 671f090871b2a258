#pragma once

// Umbrella header for the reciprocal-learning bounds library.

#include "recibound/core.hpp"
#include "recibound/rng.hpp"
#include "recibound/transport.hpp"
#include "recibound/learner.hpp"
#include "recibound/reciprocal.hpp"
#include "recibound/bounds.hpp"
#include "recibound/io.hpp"
#include "recibound/validate.hpp"
