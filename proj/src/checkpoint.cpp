#include "ecgformer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace ecgformer {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'F'};

template <class X>
void write_le(std::ofstream& out, X v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class X>
X read_le(std::ifstream& in, const std::string& path) {
    X v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ValueError("checkpoint " + path + " is truncated");
    return v;
}

template <class T>
constexpr const char* dtype_name() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else return "f64";
}

}  // namespace

const TensorBlob* CheckpointData::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

template <class T>
TensorBlob make_blob(const std::string& name, const Tensor<T>& t) {
    TensorBlob b;
    b.name = name;
    b.dtype = dtype_name<T>();
    b.shape = t.shape();
    b.raw.resize(t.numel() * sizeof(T));
    std::memcpy(b.raw.data(), t.values().data(), b.raw.size());
    return b;
}

template <class T>
void blob_into(const TensorBlob& blob, Tensor<T>& dst) {
    if (blob.dtype != dtype_name<T>())
        throw ValueError("tensor '" + blob.name + "' has dtype " + blob.dtype +
                         ", expected " + dtype_name<T>());
    if (blob.shape != dst.shape())
        throw ValueError("tensor '" + blob.name + "' has shape " +
                         shape_str(blob.shape) + ", expected " +
                         shape_str(dst.shape()));
    if (blob.raw.size() != dst.numel() * sizeof(T))
        throw ValueError("tensor '" + blob.name + "' payload size mismatch");
    std::memcpy(dst.values().data(), blob.raw.data(), blob.raw.size());
}

void save_checkpoint(const CheckpointData& ckpt, const std::string& path) {
    json table = json::array();
    size_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        table.push_back({{"name", t.name},
                         {"dtype", t.dtype},
                         {"shape", t.shape},
                         {"offset", offset},
                         {"nbytes", t.raw.size()}});
        offset += t.raw.size();
    }
    json config = json::parse(ckpt.config_json, nullptr, false);
    if (config.is_discarded())
        throw ValueError("checkpoint config snapshot is not valid JSON");
    const json manifest{{"config", config},
                        {"epoch", ckpt.epoch},
                        {"seed", ckpt.seed},
                        {"adam_step", ckpt.adam_step},
                        {"tensors", table}};
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    write_le<uint32_t>(out, ckpt.version);
    write_le<uint64_t>(out, mtext.size());
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& t : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(t.raw.data()),
                  static_cast<std::streamsize>(t.raw.size()));
    if (!out) throw IoError("write failed for " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ValueError(path + " is not a checkpoint file");
    CheckpointData ckpt;
    ckpt.version = read_le<uint32_t>(in, path);
    if (ckpt.version != 1)
        throw ValueError("unsupported checkpoint version " +
                         std::to_string(ckpt.version));
    const auto mlen = read_le<uint64_t>(in, path);
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw ValueError("checkpoint " + path + " is truncated");
    const json manifest = json::parse(mtext, nullptr, false);
    if (manifest.is_discarded())
        throw ValueError("checkpoint " + path + " has a malformed manifest");
    try {
        ckpt.config_json = manifest.at("config").dump();
        ckpt.epoch = manifest.at("epoch").get<int64_t>();
        ckpt.seed = manifest.at("seed").get<uint64_t>();
        ckpt.adam_step = manifest.at("adam_step").get<int64_t>();
        for (const auto& e : manifest.at("tensors")) {
            TensorBlob b;
            b.name = e.at("name").get<std::string>();
            b.dtype = e.at("dtype").get<std::string>();
            b.shape = e.at("shape").get<Shape>();
            b.raw.resize(e.at("nbytes").get<size_t>());
            in.read(reinterpret_cast<char*>(b.raw.data()),
                    static_cast<std::streamsize>(b.raw.size()));
            if (!in) throw ValueError("checkpoint " + path + " is truncated");
            ckpt.tensors.push_back(std::move(b));
        }
    } catch (const json::exception& e) {
        throw ValueError("checkpoint " + path + " manifest: " + e.what());
    }
    return ckpt;
}

template TensorBlob make_blob(const std::string&, const Tensor<float>&);
template TensorBlob make_blob(const std::string&, const Tensor<double>&);
template void blob_into(const TensorBlob&, Tensor<float>&);
template void blob_into(const TensorBlob&, Tensor<double>&);

}  // namespace ecgformer
