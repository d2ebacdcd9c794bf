#pragma once

// Umbrella header for the EUNN library: unitary compositions of Givens
// rotation layers with O(1)-per-parameter gradients, the EURNN recurrent
// cell, training utilities and benchmark tasks.

#include "eunn/bench.hpp"
#include "eunn/complex_vec.hpp"
#include "eunn/dense.hpp"
#include "eunn/errors.hpp"
#include "eunn/optim.hpp"
#include "eunn/rng.hpp"
#include "eunn/rnn_cell.hpp"
#include "eunn/rotation_plan.hpp"
#include "eunn/serialize.hpp"
#include "eunn/tasks.hpp"
#include "eunn/unitary_ops.hpp"
