#pragma once

#include "gse/audio/fft.hpp"
#include "gse/audio/metrics.hpp"
#include "gse/audio/synth.hpp"
#include "gse/audio/wav.hpp"
#include "gse/config.hpp"
#include "gse/error.hpp"
#include "gse/ledger.hpp"
#include "gse/nn/checkpoint.hpp"
#include "gse/nn/layers.hpp"
#include "gse/nn/loss.hpp"
#include "gse/nn/network.hpp"
#include "gse/nn/optim.hpp"
#include "gse/nn/providers.hpp"
#include "gse/nn/train.hpp"
#include "gse/pipeline.hpp"
#include "gse/random.hpp"
#include "gse/sampler.hpp"
#include "gse/score.hpp"
#include "gse/sde.hpp"
#include "gse/signal.hpp"
#include "gse/streaming.hpp"
