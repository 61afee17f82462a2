#pragma once

#include "psevis/analysis.hpp"
#include "psevis/color.hpp"
#include "psevis/corpus.hpp"
#include "psevis/encoding.hpp"
#include "psevis/errors.hpp"
#include "psevis/lstm.hpp"
#include "psevis/perplexity.hpp"
#include "psevis/pipeline.hpp"
#include "psevis/probes.hpp"
#include "psevis/rng.hpp"
#include "psevis/serialization.hpp"
#include "psevis/service.hpp"
#include "psevis/svg.hpp"
#include "psevis/train.hpp"
