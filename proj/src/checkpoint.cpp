#include "wingen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace wingen {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, s.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out = s.substr(pos, n);
        pos += n;
        return out;
    }
    void need(std::size_t n) const {
        if (pos + n > s.size() - 8) throw CheckpointFormatError("checkpoint truncated at byte " + std::to_string(pos));
    }
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    std::string out = "WGN1";
    put<std::uint32_t>(out, k_checkpoint_version);
    put<std::uint64_t>(out, ck.config_digest);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& [name, t] : ck.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        const bool f32 = t.precision() == Precision::single;
        put<std::uint8_t>(out, f32 ? 1 : 2);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
        for (double v : t.data()) {
            if (f32)
                put<float>(out, static_cast<float>(v));
            else
                put<double>(out, v);
        }
    }
    put<std::uint64_t>(out, fnv1a64(out));
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 + 4 + 8 + 4 + 8 || bytes.compare(0, 4, "WGN1") != 0)
        throw CheckpointFormatError("not a WGN1 checkpoint");
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    const std::uint64_t actual = fnv1a64(std::string_view(bytes).substr(0, bytes.size() - 8));
    if (stored != actual) throw ChecksumError("checkpoint checksum mismatch");
    Reader r{bytes, 4};
    const auto version = r.get<std::uint32_t>();
    if (version != k_checkpoint_version)
        throw CheckpointFormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config_digest = r.get<std::uint64_t>();
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = r.bytes(r.get<std::uint32_t>());
        const auto dtype = r.get<std::uint8_t>();
        if (dtype != 1 && dtype != 2) throw CheckpointFormatError("record '" + name + "' has unknown dtype");
        Shape shape(r.get<std::uint32_t>());
        for (auto& d : shape) d = r.get<std::uint64_t>();
        DenseArray t(shape, dtype == 1 ? Precision::single : Precision::double_);
        for (auto& v : t.mutable_data()) v = dtype == 1 ? static_cast<double>(r.get<float>()) : r.get<double>();
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    if (r.pos != bytes.size() - 8) throw CheckpointFormatError("trailing bytes after the last record");
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    const std::string bytes = serialize_checkpoint(ck);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_checkpoint(ss.str());
}

Checkpoint make_checkpoint(const ModelParams& params, const LoraAdapter* adapter, std::uint64_t config_digest) {
    Checkpoint ck;
    ck.config_digest = config_digest;
    ck.tensors = params.values();
    if (adapter)
        for (const auto& [target, pair] : adapter->pairs()) {
            ck.tensors.emplace(LoraAdapter::a_name(target), pair.a);
            ck.tensors.emplace(LoraAdapter::b_name(target), pair.b);
        }
    return ck;
}

void restore_checkpoint(const Checkpoint& ck, ModelParams& params, LoraAdapter* adapter) {
    std::set<std::string> expected;
    auto fill = [&](const std::string& name, DenseArray& dst) {
        expected.insert(name);
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end()) throw CheckpointFormatError("checkpoint lacks '" + name + "'");
        if (it->second.shape() != dst.shape())
            throw CheckpointFormatError("'" + name + "' is " + shape_str(it->second.shape()) + ", model expects " +
                                        shape_str(dst.shape()));
        dst = it->second;
    };
    for (const auto& name : params.names()) fill(name, params.mutable_get(name));
    if (adapter)
        for (const auto& [target, pair] : adapter->pairs()) {
            fill(LoraAdapter::a_name(target), adapter->mutable_pair(target).a);
            fill(LoraAdapter::b_name(target), adapter->mutable_pair(target).b);
        }
    for (const auto& [name, t] : ck.tensors)
        if (!expected.count(name)) throw CheckpointFormatError("checkpoint has unexpected '" + name + "'");
}

}  // namespace wingen
