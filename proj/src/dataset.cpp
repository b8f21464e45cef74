#include "uq/dataset.hpp"

#include "json.hpp"
#include "uq/error.hpp"
#include "uq/tensor_io.hpp"

namespace uq {

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.json";
  const auto bytes = read_file_bytes(index_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, "index.json is not valid JSON: " + std::string(e.what()));
  }
  const auto& ids = doc.is_object() && doc.contains("ids") ? doc["ids"] : doc;
  if (!ids.is_array()) throw Error(ErrorKind::parse, "index.json must list ids");
  Dataset out;
  for (const auto& id : ids) {
    if (!id.is_string()) throw Error(ErrorKind::parse, "dataset ids must be strings");
    const auto name = id.get<std::string>();
    out.push_back({name, read_tensor_file(dir / (name + ".x.ntsr")), read_tensor_file(dir / (name + ".y.ntsr"))});
  }
  if (out.empty()) throw Error(ErrorKind::argument, "dataset " + dir.string() + " is empty");
  return out;
}

void save_dataset_dir(const std::filesystem::path& dir, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& s : data) {
    write_tensor_file(dir / (s.id + ".x.ntsr"), s.x);
    write_tensor_file(dir / (s.id + ".y.ntsr"), s.y);
    ids.push_back(s.id);
  }
  const auto text = nlohmann::json{{"ids", ids}}.dump(2) + "\n";
  write_file_bytes(dir / "index.json",
                   std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace uq
