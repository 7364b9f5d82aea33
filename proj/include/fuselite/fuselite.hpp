#pragma once

// Umbrella header for the fuselite IR/VIS fusion toolkit.

#include "fuselite/attention.hpp"
#include "fuselite/autodiff.hpp"
#include "fuselite/autodiff_nn.hpp"
#include "fuselite/bench.hpp"
#include "fuselite/errors.hpp"
#include "fuselite/generator.hpp"
#include "fuselite/gradcheck.hpp"
#include "fuselite/image_io.hpp"
#include "fuselite/metrics.hpp"
#include "fuselite/nn_ops.hpp"
#include "fuselite/tensor.hpp"
#include "fuselite/train.hpp"
#include "fuselite/weights_io.hpp"
