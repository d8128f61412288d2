#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hsaw/hierarchy.hpp"
#include "hsaw/scene.hpp"
#include "hsaw/tensor.hpp"

// Bit-exact persistence. Every format is little-endian and versioned; all
// round-trips are lossless down to the float bits.
//
// TensorBlob: magic "HSAW", u32 version, u32 name length + UTF-8 name,
// u32 ndim, u32 dims, float32 payload (row-major).
// DatasetDir: manifest.txt + frames.blob {N,1,H,W} + flows.blob {N,2,H,W}
// + labels.bin (one byte per frame).
// ModelDir: manifest.txt + level<L>/ with one blob per network parameter and
// the SOM prototype blob.
namespace hsaw::store {

inline constexpr std::uint32_t kFormatVersion = 1;

struct NamedTensor {
    std::string name;
    nn::Tensor tensor;
};

std::vector<std::uint8_t> encode_blob(const std::string& name, const nn::Tensor& t);
// origin names the source in diagnostics (file path, test label...)
NamedTensor decode_blob(const std::vector<std::uint8_t>& bytes, const std::string& origin);

void save_blob(const std::filesystem::path& file, const std::string& name, const nn::Tensor& t);
NamedTensor load_blob(const std::filesystem::path& file);

void save_dataset(const std::filesystem::path& dir, const scene::Sequence& seq);
scene::Sequence load_dataset(const std::filesystem::path& dir);

void save_model(const std::filesystem::path& dir, const hier::Hierarchy& h);
hier::Hierarchy load_model(const std::filesystem::path& dir);

// key=value lines; '#' starts a comment, blank lines are skipped, later keys
// override earlier ones
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> load_config(const std::filesystem::path& file);

}  // namespace hsaw::store
