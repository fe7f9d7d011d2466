#include "foct/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace foct {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'O', 'C', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model, const TrainConfig& cfg,
                     int iteration, const std::string& loss_history_ref) {
    auto params = model.all_params();

    json header;
    header["config"] = json::parse(train_config_to_json_text(cfg));
    header["iteration"] = iteration;
    header["loss_history"] = loss_history_ref;
    header["dtype"] = "f32";
    json dir = json::array();
    std::uint64_t offset = 0;
    for (const auto& p : params) {
        json e;
        e["name"] = p.name;
        e["shape"] = p.shape;
        e["offset"] = offset;
        e["count"] = p.value->size();
        dir.push_back(std::move(e));
        offset += p.value->size();
    }
    header["params"] = std::move(dir);
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u64(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.value->data()),
                  static_cast<std::streamsize>(p.value->size() * sizeof(float)));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

CheckpointRecord load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const std::uint64_t header_len = get_u64(in);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: bad header JSON: ") + e.what());
    }
    if (header.value("dtype", "") != "f32")
        throw std::runtime_error("checkpoint: unsupported dtype");

    CheckpointRecord rec;
    rec.config = train_config_from_json_text(header.at("config").dump());
    rec.iteration = header.at("iteration").get<int>();
    rec.loss_history = header.value("loss_history", "");
    rec.model = Model<float>(rec.config.model);
    rec.model.init(rec.config.seed);

    auto params = rec.model.all_params();
    const json& dir = header.at("params");
    if (!dir.is_array() || dir.size() != params.size())
        throw std::runtime_error("checkpoint: parameter directory size mismatch");
    std::uint64_t expect_offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const json& e = dir[i];
        if (e.at("name").get<std::string>() != params[i].name)
            throw std::runtime_error("checkpoint: parameter name mismatch at index " +
                                     std::to_string(i) + " (" + e.at("name").get<std::string>() +
                                     " vs " + params[i].name + ")");
        if (e.at("shape").get<std::vector<int>>() != params[i].shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + params[i].name);
        if (e.at("count").get<std::uint64_t>() != params[i].value->size())
            throw std::runtime_error("checkpoint: element count mismatch for " + params[i].name);
        if (e.at("offset").get<std::uint64_t>() != expect_offset)
            throw std::runtime_error("checkpoint: offset mismatch for " + params[i].name);
        expect_offset += params[i].value->size();
    }
    for (auto& p : params) {
        in.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(p.value->size() * sizeof(float)));
        if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
    }
    return rec;
}

}  // namespace foct
