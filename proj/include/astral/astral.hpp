#pragma once

#include "astral/adversarial.hpp"
#include "astral/checkpoint.hpp"
#include "astral/config.hpp"
#include "astral/conll.hpp"
#include "astral/crf.hpp"
#include "astral/embedding.hpp"
#include "astral/error.hpp"
#include "astral/evaluate.hpp"
#include "astral/gated_cnn.hpp"
#include "astral/grad_check.hpp"
#include "astral/gradcheck_suite.hpp"
#include "astral/layer.hpp"
#include "astral/lstm.hpp"
#include "astral/metrics.hpp"
#include "astral/model.hpp"
#include "astral/optimizer.hpp"
#include "astral/rng.hpp"
#include "astral/synthetic.hpp"
#include "astral/tensor.hpp"
#include "astral/train.hpp"
