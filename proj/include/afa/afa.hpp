#pragma once

// Umbrella header for the adversarial attention-feedback library.

#include "afa/adam.hpp"
#include "afa/block.hpp"
#include "afa/checkpoint.hpp"
#include "afa/config.hpp"
#include "afa/corpus.hpp"
#include "afa/discriminator.hpp"
#include "afa/errors.hpp"
#include "afa/evaluation.hpp"
#include "afa/masking.hpp"
#include "afa/ops.hpp"
#include "afa/planted.hpp"
#include "afa/rng.hpp"
#include "afa/target_model.hpp"
#include "afa/tensor.hpp"
#include "afa/trainer.hpp"
#include "afa/viz.hpp"
#include "afa/vocab.hpp"
