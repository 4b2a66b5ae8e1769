#pragma once

#include "dtl/algorithms.hpp"
#include "dtl/bounds.hpp"
#include "dtl/csv.hpp"
#include "dtl/envs.hpp"
#include "dtl/error.hpp"
#include "dtl/harness.hpp"
#include "dtl/io.hpp"
#include "dtl/linear_fa.hpp"
#include "dtl/markov_chain.hpp"
#include "dtl/mdp.hpp"
#include "dtl/oracles.hpp"
#include "dtl/random.hpp"
