// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rfdet/errors.hpp"
#include "rfdet/rng.hpp"
#include "rfdet/sigcore.hpp"
#include "rfdet/synth.hpp"
#include "rfdet/spectro.hpp"
#include "rfdet/dataset.hpp"
#include "rfdet/nn/tensor.hpp"
#include "rfdet/nn/layers.hpp"
#include "rfdet/nn/vgg.hpp"
#include "rfdet/nn/adam.hpp"
#include "rfdet/nn/checkpoint.hpp"
#include "rfdet/nn/train.hpp"
#include "rfdet/eval/metrics.hpp"
#include "rfdet/eval/snr_curve.hpp"
#include "rfdet/eval/embeddings.hpp"
#include "rfdet/eval/tsne.hpp"
#include "rfdet/eval/cluster.hpp"
#include "rfdet/eval/reports.hpp"
#include "rfdet/stream/queue.hpp"
#include "rfdet/stream/scenario.hpp"
#include "rfdet/stream/source.hpp"
#include "rfdet/stream/detector.hpp"
