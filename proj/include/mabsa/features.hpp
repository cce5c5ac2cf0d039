#pragma once

#include <cstddef>
#include <vector>

#include "mabsa/graph.hpp"

namespace mabsa {

// Slot arithmetic for the concatenated encoder input
//   <img>, R regions, </img>, <bos>, T tokens, <eos>
// Total length is R + T + 4 and the textual sub-range is exactly
// [text_begin, text_begin + T).
struct InputLayout {
    std::size_t region_count = 0;
    std::size_t text_len = 0;

    std::size_t length() const { return region_count + text_len + 4; }
    std::size_t img_slot() const { return 0; }
    std::size_t region_slot(std::size_t i) const { return 1 + i; }
    std::size_t img_end_slot() const { return region_count + 1; }
    std::size_t bos_slot() const { return region_count + 2; }
    std::size_t text_begin() const { return region_count + 3; }
    std::size_t eos_slot() const { return region_count + 3 + text_len; }
};

// Embedding/projection parameters bound into a graph; a thin view the model
// module fills from its parameter set.
struct FeatureVars {
    Var proj_w;      // d x feature_dim
    Var proj_b;      // d
    Var tok_embed;   // V x d
    Var pos_embed;   // max_seq x d
    Var type_embed;  // 2 x d (visual, textual)
    bool region_positions = true;
};

// V[:, i] = W r_i + b for every region row.
Var project_regions(Graph& g, const FeatureVars& fv, Var region_matrix);

struct AssembledInput {
    Var embedded;      // (R+T+4) x d, position and modality-type embeddings added
    Var projected;     // R x d
    Var token_embeds;  // T x d, raw token embedding rows (the W of the text part)
    InputLayout layout;
};

AssembledInput assemble_input(Graph& g, const FeatureVars& fv, Var region_matrix,
                              const std::vector<int>& token_ids);

}  // namespace mabsa
