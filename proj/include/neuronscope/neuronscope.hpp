#pragma once

#include "neuronscope/activation_store.hpp"
#include "neuronscope/annotation.hpp"
#include "neuronscope/attribution.hpp"
#include "neuronscope/binary_matrix.hpp"
#include "neuronscope/corpus.hpp"
#include "neuronscope/descriptor_pipeline.hpp"
#include "neuronscope/embedding.hpp"
#include "neuronscope/evaluation.hpp"
#include "neuronscope/llm_gateway.hpp"
#include "neuronscope/prompt.hpp"
#include "neuronscope/synthkit.hpp"

namespace neuronscope {
inline constexpr std::string_view version = "0.1.0";
}
