#pragma once

// Umbrella header for the whole toolkit: knowledge-graph ingestion, dense
// and binarized CP factors, training, ranking evaluation, model files, and
// the scoring microbenchmark.

#include "bcp/bench.hpp"
#include "bcp/evaluator.hpp"
#include "bcp/factors.hpp"
#include "bcp/knowledge_graph.hpp"
#include "bcp/model_io.hpp"
#include "bcp/packed.hpp"
#include "bcp/random.hpp"
#include "bcp/trainer.hpp"
#include "bcp/triple.hpp"
