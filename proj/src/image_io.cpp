#include "pseg/image_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pseg/errors.hpp"

namespace pseg {

namespace {

constexpr char kMagic[] = "PSEG1\n";
constexpr std::size_t kMagicLen = 6;

void append_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t load_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string header_string(const Lattice& lattice, const char* dtype,
                          const char* kind) {
  nlohmann::json header{
      {"dims", lattice.dims()}, {"dtype", dtype}, {"kind", kind}};
  return header.dump();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_config(out.good(), "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require_config(out.good(), "write failed: " + path.string());
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require_config(in.good(), "cannot open: " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  require_config(!in.bad(), "read failed: " + path.string());
  return bytes;
}

struct ParsedHeader {
  Lattice lattice;
  std::string dtype;
  std::string kind;
  std::size_t payload_offset = 0;
};

ParsedHeader parse_header(const std::vector<unsigned char>& bytes,
                          const std::string& name) {
  require_config(bytes.size() >= kMagicLen + 4, name + ": truncated file");
  require_config(std::equal(kMagic, kMagic + kMagicLen, bytes.begin()),
                 name + ": bad magic bytes");
  std::uint32_t header_len = load_u32le(bytes.data() + kMagicLen);
  std::size_t payload_offset = kMagicLen + 4 + header_len;
  require_config(payload_offset <= bytes.size(),
                 name + ": header length exceeds file size");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kMagicLen + 4,
                                   bytes.begin() + static_cast<std::ptrdiff_t>(payload_offset));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(name + ": header is not valid JSON: " + e.what());
  }
  require_config(header.is_object(), name + ": header must be a JSON object");
  for (const auto& item : header.items()) {
    require_config(item.key() == "dims" || item.key() == "dtype" ||
                       item.key() == "kind",
                   name + ": unknown header key '" + item.key() + "'");
  }
  require_config(header.contains("dims") && header.contains("dtype") &&
                     header.contains("kind"),
                 name + ": header needs dims, dtype, kind");
  require_config(header["dims"].is_array() && !header["dims"].empty() &&
                     header["dims"].size() <= static_cast<std::size_t>(kMaxRank),
                 name + ": dims must list 1 to 3 extents");
  std::vector<int> dims;
  for (const auto& d : header["dims"]) {
    require_config(d.is_number_integer() && d.get<int>() >= 1,
                   name + ": dims entries must be positive integers");
    dims.push_back(d.get<int>());
  }

  ParsedHeader parsed;
  parsed.lattice = Lattice(dims);
  parsed.dtype = header["dtype"].get<std::string>();
  parsed.kind = header["kind"].get<std::string>();
  parsed.payload_offset = payload_offset;
  bool intensity = parsed.dtype == "f32" && parsed.kind == "intensity";
  bool label = parsed.dtype == "i8" && parsed.kind == "label";
  require_config(intensity || label,
                 name + ": dtype/kind must be f32/intensity or i8/label");
  return parsed;
}

}  // namespace

void write_image(const std::filesystem::path& path, const Image& image) {
  std::string bytes(kMagic, kMagicLen);
  std::string header = header_string(image.lattice, "f32", "intensity");
  append_u32le(bytes, static_cast<std::uint32_t>(header.size()));
  bytes += header;
  for (double v : image.values) {
    float f = static_cast<float>(v);
    require_contract(std::isfinite(f), "image value not representable as f32");
    append_u32le(bytes, std::bit_cast<std::uint32_t>(f));
  }
  write_file(path, bytes);
}

void write_label_image(const std::filesystem::path& path,
                       const LabelImage& labels) {
  std::string bytes(kMagic, kMagicLen);
  std::string header = header_string(labels.lattice, "i8", "label");
  append_u32le(bytes, static_cast<std::uint32_t>(header.size()));
  bytes += header;
  for (std::int8_t l : labels.labels) bytes.push_back(static_cast<char>(l));
  write_file(path, bytes);
}

Image read_image(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes = read_file(path);
  ParsedHeader header = parse_header(bytes, path.string());
  require_config(header.kind == "intensity",
                 path.string() + ": expected an intensity image");
  std::size_t count = header.lattice.size();
  require_config(bytes.size() - header.payload_offset == 4 * count,
                 path.string() + ": payload size mismatch");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t raw = load_u32le(bytes.data() + header.payload_offset + 4 * i);
    float f = std::bit_cast<float>(raw);
    require_config(std::isfinite(f),
                   path.string() + ": non-finite intensity value");
    values[i] = static_cast<double>(f);
  }
  return Image(header.lattice, std::move(values));
}

LabelImage read_label_image(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes = read_file(path);
  ParsedHeader header = parse_header(bytes, path.string());
  require_config(header.kind == "label",
                 path.string() + ": expected a label image");
  std::size_t count = header.lattice.size();
  require_config(bytes.size() - header.payload_offset == count,
                 path.string() + ": payload size mismatch");
  std::vector<std::int8_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::int8_t l = static_cast<std::int8_t>(bytes[header.payload_offset + i]);
    require_config(l == 1 || l == -1,
                   path.string() + ": label payload must be +1/-1");
    labels[i] = l;
  }
  return LabelImage(header.lattice, std::move(labels));
}

}  // namespace pseg
