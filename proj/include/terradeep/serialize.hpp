#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "terradeep/network.hpp"
#include "terradeep/svm.hpp"
#include "terradeep/tensor.hpp"

namespace terradeep {

nlohmann::json to_json(const LayerSpec& layer);
nlohmann::json to_json(const NetworkSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);
// Throws FormatError on malformed input; the result passes validate().
NetworkSpec network_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SvmConfig& cfg);
SvmConfig svm_config_from_json(const nlohmann::json& j);

// TDML container: "TDML", u32 version, 4-byte section tag, u32-length-prefixed
// UTF-8 JSON header, u32 tensor count, then per tensor rank u32, dims
// u32 x rank and little-endian f64 values.
inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::string_view kSectionNetwork = "NNET";
inline constexpr std::string_view kSectionSvm = "SVMC";

struct ModelFile {
  std::string section;
  nlohmann::json header;
  std::vector<Tensor> tensors;
};

std::string encode_model(const ModelFile& file);
ModelFile decode_model(std::string_view bytes, const std::string& source = "<memory>");
void write_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile read_model_file(const std::filesystem::path& path);

// Parameter tensors followed by both optimizer accumulator sets.
void append_network_state(const NetworkState& state, std::vector<Tensor>& out);
NetworkState network_state_from(const NetworkSpec& spec, std::span<const Tensor> tensors, std::size_t& cursor);

// Machines are stored as (support, dual coefficients, [bias, gamma]) triples.
nlohmann::json svm_header(const MulticlassSvmModel& model);
void append_svm_tensors(const MulticlassSvmModel& model, std::vector<Tensor>& out);
MulticlassSvmModel svm_model_from(const nlohmann::json& header, std::span<const Tensor> tensors, std::size_t& cursor);

}  // namespace terradeep
