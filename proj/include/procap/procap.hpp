#pragma once

#include "procap/autodiff/adam.hpp"
#include "procap/autodiff/checkpoint.hpp"
#include "procap/autodiff/lstm.hpp"
#include "procap/autodiff/tensor.hpp"
#include "procap/binary_io.hpp"
#include "procap/corpus/features.hpp"
#include "procap/corpus/fixtures.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/error.hpp"
#include "procap/inference/anticipate.hpp"
#include "procap/inference/segmentation.hpp"
#include "procap/inference/trace.hpp"
#include "procap/io/bundle.hpp"
#include "procap/log.hpp"
#include "procap/metrics/recall.hpp"
#include "procap/metrics/report.hpp"
#include "procap/metrics/sentence.hpp"
#include "procap/metrics/stemmer.hpp"
#include "procap/model/decoder.hpp"
#include "procap/model/encoders.hpp"
#include "procap/model/model.hpp"
#include "procap/model/recipe_net.hpp"
#include "procap/training/config.hpp"
#include "procap/training/loss.hpp"
#include "procap/training/trainer.hpp"
