#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mabsa/error.hpp"
#include "mabsa/model.hpp"

namespace mabsa {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw LoadError("checkpoint: truncated while reading " + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    write_pod(out, kVersion);

    nlohmann::json header;
    header["model"] = nlohmann::json::parse(params.config.to_json());
    header["vocab"] = vocab.tokens();
    std::string hs = header.dump();
    write_pod(out, static_cast<std::uint64_t>(hs.size()));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    write_pod(out, static_cast<std::uint64_t>(params.tensor_count()));
    params.for_each([&](const std::string& name, const Tensor& t) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) write_pod(out, static_cast<std::uint64_t>(e));
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!out) throw LoadError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw LoadError("checkpoint: bad magic in " + path);
    }
    auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw LoadError("checkpoint: unsupported version " + std::to_string(version));
    }
    auto header_len = read_pod<std::uint64_t>(in, "header length");
    std::string hs(header_len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw LoadError("checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("checkpoint: malformed header JSON: ") + e.what());
    }
    Checkpoint ck;
    ModelConfig cfg = ModelConfig::from_json(header.at("model").dump());
    ck.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (cfg.vocab_size != ck.vocab.size()) {
        throw LoadError("checkpoint: config vocab_size disagrees with stored vocabulary");
    }
    ck.params = init_params(cfg, 0);  // gives the expected shapes; data overwritten below

    auto tensor_count = read_pod<std::uint64_t>(in, "tensor count");
    if (tensor_count != ck.params.tensor_count()) {
        throw LoadError("checkpoint: tensor count " + std::to_string(tensor_count) +
                        " does not match config (" + std::to_string(ck.params.tensor_count()) + ")");
    }
    ck.params.for_each([&](const std::string& name, Tensor& t) {
        auto name_len = read_pod<std::uint32_t>(in, "tensor name length");
        std::string stored(name_len, '\0');
        in.read(stored.data(), name_len);
        if (!in || stored != name) {
            throw LoadError("checkpoint: expected tensor '" + name + "', found '" + stored + "'");
        }
        auto rank = read_pod<std::uint32_t>(in, "rank of " + name);
        std::vector<std::size_t> shape;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(in, "extent")));
        }
        if (shape != t.shape()) {
            throw LoadError("checkpoint: shape mismatch for " + name);
        }
        in.read(reinterpret_cast<char*>(t.data().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw LoadError("checkpoint: truncated data for " + name);
    });
    return ck;
}

}  // namespace mabsa
