#pragma once

#include "semjson/common.hpp"
#include "semjson/random.hpp"
#include "semjson/matrix.hpp"
#include "semjson/json_ingest.hpp"
#include "semjson/embeddings.hpp"
#include "semjson/binary_io.hpp"
#include "semjson/pvdbow.hpp"
#include "semjson/features.hpp"
#include "semjson/graph.hpp"
#include "semjson/nn.hpp"
#include "semjson/gcn.hpp"
#include "semjson/mlp.hpp"
#include "semjson/checkpoint.hpp"
#include "semjson/metrics.hpp"
#include "semjson/training.hpp"
#include "semjson/synth.hpp"
#include "semjson/pipeline.hpp"
