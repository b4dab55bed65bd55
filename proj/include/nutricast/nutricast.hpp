#pragma once

#include "nutricast/core/adam.hpp"
#include "nutricast/core/autograd.hpp"
#include "nutricast/core/error.hpp"
#include "nutricast/core/grad_check.hpp"
#include "nutricast/core/hash.hpp"
#include "nutricast/core/layers.hpp"
#include "nutricast/core/parameter.hpp"
#include "nutricast/core/random.hpp"
#include "nutricast/core/tensor.hpp"
#include "nutricast/data/binning.hpp"
#include "nutricast/data/manifest.hpp"
#include "nutricast/data/split.hpp"
#include "nutricast/data/synth.hpp"
#include "nutricast/eval/auc.hpp"
#include "nutricast/eval/metrics.hpp"
#include "nutricast/eval/plot.hpp"
#include "nutricast/eval/report.hpp"
#include "nutricast/image/image.hpp"
#include "nutricast/interpret/gradcam.hpp"
#include "nutricast/interpret/overlay.hpp"
#include "nutricast/interpret/saliency.hpp"
#include "nutricast/model/classifier.hpp"
#include "nutricast/model/config.hpp"
#include "nutricast/model/contrastive.hpp"
#include "nutricast/model/encoders.hpp"
#include "nutricast/model/model.hpp"
#include "nutricast/text/tokenizer.hpp"
#include "nutricast/train/checkpoint.hpp"
#include "nutricast/train/dataset.hpp"
#include "nutricast/train/embedding_cache.hpp"
#include "nutricast/train/train_config.hpp"
#include "nutricast/train/trainer.hpp"
#include "nutricast/validation/chemistry.hpp"
#include "nutricast/version.hpp"
