#include "vqad/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "vqad/errors.hpp"
#include "vqad/version.hpp"

namespace vqad {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'V', 'Q', 'A', 'D', 'C', 'K', 'P', '1'};

json network_to_json(const NetworkConfig& c) {
    return json{{"n", c.n},
                {"frame_channels", c.frame_channels},
                {"levels", c.levels},
                {"base_channels", c.base_channels},
                {"bottleneck_dim", c.bottleneck_dim},
                {"codebook_size", c.codebook_size},
                {"mode", to_string(c.mode)},
                {"use_codebook", c.use_codebook}};
}

NetworkConfig network_from_json(const json& j) {
    NetworkConfig c;
    c.n = j.at("n").get<int>();
    c.frame_channels = j.at("frame_channels").get<int>();
    c.levels = j.at("levels").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.bottleneck_dim = j.at("bottleneck_dim").get<int>();
    c.codebook_size = j.at("codebook_size").get<int>();
    c.use_codebook = j.at("use_codebook").get<bool>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "prediction")
        c.mode = ModelMode::prediction;
    else if (mode == "reconstruction")
        c.mode = ModelMode::reconstruction;
    else
        throw LoadError("checkpoint: unknown mode '" + mode + "'");
    return c;
}

void write_blob(std::ofstream& out, const void* data, size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_blob(std::ifstream& in, void* data, size_t bytes, const std::string& what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!in) throw LoadError("checkpoint: truncated while reading " + what);
}

struct TensorEntry {
    std::string name;
    std::int64_t rows = 0, cols = 0;
    std::string kind;  // param | buffer | usage | adam_m | adam_v
};

json open_header(std::ifstream& in, std::vector<TensorEntry>& entries) {
    char magic[8];
    read_blob(in, magic, 8, "magic");
    if (std::memcmp(magic, kMagic, 8) != 0) throw LoadError("checkpoint: bad magic");
    std::uint64_t hlen = 0;
    read_blob(in, &hlen, sizeof(hlen), "header length");
    std::string text(hlen, '\0');
    read_blob(in, text.data(), hlen, "header");
    json header = json::parse(text, nullptr, false);
    if (header.is_discarded()) throw LoadError("checkpoint: corrupt header JSON");
    for (const auto& t : header.at("tensors")) {
        TensorEntry e;
        e.name = t.at("name").get<std::string>();
        e.rows = t.at("rows").get<std::int64_t>();
        e.cols = t.at("cols").get<std::int64_t>();
        e.kind = t.at("kind").get<std::string>();
        entries.push_back(std::move(e));
    }
    return header;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, VqUnet<float>& net,
                     Adam<float>* optimizer, int epoch, long step) {
    json header;
    header["version"] = kVersionTag;
    header["scalar"] = "f32";
    header["network"] = network_to_json(net.config());
    header["epoch"] = epoch;
    header["step"] = step;
    header["normalization"] = {{"scale", 127.5}, {"offset", -1.0}};

    std::vector<std::pair<std::string, const void*>> blobs;
    std::vector<size_t> blob_bytes;
    json tensors = json::array();
    auto add = [&](const std::string& name, const std::string& kind, std::int64_t rows,
                   std::int64_t cols, const void* data, size_t bytes) {
        tensors.push_back({{"name", name}, {"kind", kind}, {"rows", rows}, {"cols", cols}});
        blobs.emplace_back(name, data);
        blob_bytes.push_back(bytes);
    };

    for (Param<float>* p : net.parameters())
        add(p->name, "param", p->value.rows(), p->value.cols(), p->value.data(),
            sizeof(float) * static_cast<size_t>(p->value.size()));
    for (auto& [name, buf] : net.named_buffers())
        add(name, "buffer", buf->rows(), 1, buf->data(), sizeof(float) * static_cast<size_t>(buf->size()));
    if (net.config().use_codebook)
        add("codebook.usage", "usage", static_cast<std::int64_t>(net.codebook().usage.size()), 1,
            net.codebook().usage.data(), sizeof(std::uint64_t) * net.codebook().usage.size());
    if (optimizer != nullptr) {
        header["optimizer"] = {{"t", optimizer->steps_taken()},
                               {"lr", optimizer->learning_rate()},
                               {"clip_norm", optimizer->clip_norm()}};
        auto& m = optimizer->moment1();
        auto& v = optimizer->moment2();
        for (size_t i = 0; i < m.size(); ++i) {
            const std::string base = optimizer->params()[i]->name;
            add(base + "#m", "adam_m", m[i].rows(), m[i].cols(), m[i].data(),
                sizeof(float) * static_cast<size_t>(m[i].size()));
            add(base + "#v", "adam_v", v[i].rows(), v[i].cols(), v[i].data(),
                sizeof(float) * static_cast<size_t>(v[i].size()));
        }
    }
    header["tensors"] = tensors;

    const std::filesystem::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        const std::string text = header.dump();
        const std::uint64_t hlen = text.size();
        write_blob(out, kMagic, 8);
        write_blob(out, &hlen, sizeof(hlen));
        write_blob(out, text.data(), text.size());
        for (size_t i = 0; i < blobs.size(); ++i) write_blob(out, blobs[i].second, blob_bytes[i]);
        if (!out) throw IoError("checkpoint write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

CheckpointMeta peek_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + file.string());
    std::vector<TensorEntry> entries;
    const json header = open_header(in, entries);
    CheckpointMeta meta;
    meta.network = network_from_json(header.at("network"));
    meta.epoch = header.at("epoch").get<int>();
    meta.step = header.at("step").get<long>();
    meta.version = header.at("version").get<std::string>();
    meta.norm_scale = header.at("normalization").at("scale").get<double>();
    meta.norm_offset = header.at("normalization").at("offset").get<double>();
    return meta;
}

VqUnet<float> load_checkpoint(const std::filesystem::path& file, CheckpointMeta* meta_out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + file.string());
    std::vector<TensorEntry> entries;
    const json header = open_header(in, entries);
    CheckpointMeta meta;
    meta.network = network_from_json(header.at("network"));
    meta.epoch = header.at("epoch").get<int>();
    meta.step = header.at("step").get<long>();
    meta.version = header.at("version").get<std::string>();
    if (header.at("scalar").get<std::string>() != "f32")
        throw LoadError("checkpoint: unsupported scalar type");
    if (meta_out != nullptr) *meta_out = meta;

    VqUnet<float> net(meta.network, /*seed=*/0);
    std::map<std::string, Param<float>*> params;
    for (Param<float>* p : net.parameters()) params[p->name] = p;
    std::map<std::string, Vec<float>*> buffers;
    for (auto& [name, buf] : net.named_buffers()) buffers[name] = buf;

    for (const TensorEntry& e : entries) {
        const size_t count = static_cast<size_t>(e.rows) * static_cast<size_t>(e.cols);
        if (e.kind == "param") {
            auto it = params.find(e.name);
            if (it == params.end()) throw LoadError("checkpoint: unknown param " + e.name);
            if (it->second->value.rows() != e.rows || it->second->value.cols() != e.cols)
                throw LoadError("checkpoint: shape mismatch for " + e.name);
            read_blob(in, it->second->value.data(), count * sizeof(float), e.name);
        } else if (e.kind == "buffer") {
            auto it = buffers.find(e.name);
            if (it == buffers.end()) throw LoadError("checkpoint: unknown buffer " + e.name);
            if (it->second->size() != e.rows) throw LoadError("checkpoint: shape mismatch for " + e.name);
            read_blob(in, it->second->data(), count * sizeof(float), e.name);
        } else if (e.kind == "usage") {
            if (net.codebook().usage.size() != static_cast<size_t>(e.rows))
                throw LoadError("checkpoint: usage size mismatch");
            read_blob(in, net.codebook().usage.data(), count * sizeof(std::uint64_t), e.name);
        } else {
            in.seekg(static_cast<std::streamoff>(count * sizeof(float)), std::ios::cur);
        }
    }
    return net;
}

void load_optimizer_state(const std::filesystem::path& file, VqUnet<float>& net, Adam<float>& optimizer) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + file.string());
    std::vector<TensorEntry> entries;
    const json header = open_header(in, entries);
    if (!header.contains("optimizer")) throw LoadError("checkpoint has no optimizer state");
    optimizer.set_steps_taken(header.at("optimizer").at("t").get<long>());

    std::map<std::string, size_t> index;
    const auto& ps = optimizer.params();
    for (size_t i = 0; i < ps.size(); ++i) index[ps[i]->name] = i;

    for (const TensorEntry& e : entries) {
        const size_t count = static_cast<size_t>(e.rows) * static_cast<size_t>(e.cols);
        if (e.kind == "adam_m" || e.kind == "adam_v") {
            const std::string base = e.name.substr(0, e.name.size() - 2);
            auto it = index.find(base);
            if (it == index.end()) throw LoadError("checkpoint: optimizer state for unknown param " + base);
            Mat<float>& dst = (e.kind == "adam_m") ? optimizer.moment1()[it->second]
                                                   : optimizer.moment2()[it->second];
            if (dst.rows() != e.rows || dst.cols() != e.cols)
                throw LoadError("checkpoint: optimizer shape mismatch for " + e.name);
            read_blob(in, dst.data(), count * sizeof(float), e.name);
        } else if (e.kind == "usage") {
            in.seekg(static_cast<std::streamoff>(count * sizeof(std::uint64_t)), std::ios::cur);
        } else {
            in.seekg(static_cast<std::streamoff>(count * sizeof(float)), std::ios::cur);
        }
    }
    (void)net;
}

}  // namespace vqad
