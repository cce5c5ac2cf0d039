#include "mabsa/features.hpp"

#include "mabsa/error.hpp"
#include "mabsa/vocab.hpp"

namespace mabsa {

Var project_regions(Graph& g, const FeatureVars& fv, Var region_matrix) {
    const Tensor& regions = g.value(region_matrix);
    const Tensor& w = g.value(fv.proj_w);
    if (regions.rank() != 2 || regions.cols() != w.cols()) {
        throw DimensionError("project_regions: feature_dim mismatch, regions " +
                             regions.shape_str() + " vs weights " + w.shape_str());
    }
    return g.add_row_vector(g.matmul(region_matrix, g.transpose(fv.proj_w)), fv.proj_b);
}

AssembledInput assemble_input(Graph& g, const FeatureVars& fv, Var region_matrix,
                              const std::vector<int>& token_ids) {
    AssembledInput out;
    out.layout.region_count = g.value(region_matrix).rows();
    out.layout.text_len = token_ids.size();
    const std::size_t L = out.layout.length();
    const std::size_t d = g.value(fv.tok_embed).cols();

    out.projected = project_regions(g, fv, region_matrix);
    std::vector<std::size_t> ids;
    ids.reserve(token_ids.size());
    for (int id : token_ids) ids.push_back(static_cast<std::size_t>(id));
    out.token_embeds = g.gather_rows(fv.tok_embed, ids);

    Var img = g.gather_rows(fv.tok_embed, {tok::kImg});
    Var img_end = g.gather_rows(fv.tok_embed, {tok::kImgEnd});
    Var bos = g.gather_rows(fv.tok_embed, {tok::kBos});
    Var eos = g.gather_rows(fv.tok_embed, {tok::kEos});
    Var x = g.concat_rows({img, out.projected, img_end, bos, out.token_embeds, eos});

    const Tensor& pos_table = g.value(fv.pos_embed);
    if (L > pos_table.rows()) {
        throw CapacityError("encoder input length " + std::to_string(L) +
                            " exceeds position table " + std::to_string(pos_table.rows()));
    }
    Var pos;
    if (fv.region_positions) {
        pos = g.slice_rows(fv.pos_embed, 0, L);
    } else {
        // Shared index space, but region slots get no position signal.
        Var head = g.slice_rows(fv.pos_embed, 0, 1);
        Var zeros = g.constant(Tensor::zeros({out.layout.region_count, d}));
        Var tail = g.slice_rows(fv.pos_embed, out.layout.img_end_slot(),
                                L - out.layout.img_end_slot());
        pos = g.concat_rows({head, zeros, tail});
    }
    x = g.add(x, pos);

    std::vector<std::size_t> type_ids(L, 1);
    for (std::size_t s = 0; s <= out.layout.img_end_slot(); ++s) type_ids[s] = 0;
    x = g.add(x, g.gather_rows(fv.type_embed, type_ids));

    out.embedded = x;
    return out;
}

}  // namespace mabsa
