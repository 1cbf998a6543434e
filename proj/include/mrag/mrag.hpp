#pragma once

#include "mrag/chunker.hpp"
#include "mrag/contrastive.hpp"
#include "mrag/core.hpp"
#include "mrag/datagen.hpp"
#include "mrag/embedding.hpp"
#include "mrag/error.hpp"
#include "mrag/eval.hpp"
#include "mrag/feedback.hpp"
#include "mrag/gateway.hpp"
#include "mrag/index.hpp"
#include "mrag/manifest.hpp"
#include "mrag/metrics.hpp"
#include "mrag/prompts.hpp"
#include "mrag/retriever.hpp"
#include "mrag/triplet.hpp"
