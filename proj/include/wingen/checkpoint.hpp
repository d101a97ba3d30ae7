#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "wingen/params.hpp"

namespace wingen {

constexpr std::uint64_t k_fnv_basis = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = k_fnv_basis) {
    for (unsigned char c : bytes) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

struct ChecksumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "WGN1" container layout, little-endian:
//   magic[4] | u32 version | u64 config_digest | u32 records
//   per record: u32 name_len | name | u8 dtype (1 = f32, 2 = f64) | u32 rank | u64 dims[rank] | payload
//   u64 FNV-1a of every preceding byte
constexpr std::uint32_t k_checkpoint_version = 1;

struct Checkpoint {
    std::uint64_t config_digest = 0;
    std::map<std::string, DenseArray> tensors;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// Base weights under their own names, adapter factors under LoraAdapter::a_name / b_name.
Checkpoint make_checkpoint(const ModelParams& params, const LoraAdapter* adapter, std::uint64_t config_digest);

/// Overwrites the values of `params` (and `adapter`) from `ck`. Names and shapes must match
/// the templates exactly.
void restore_checkpoint(const Checkpoint& ck, ModelParams& params, LoraAdapter* adapter);

}  // namespace wingen
