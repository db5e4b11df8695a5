#include "hyperformer/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "hyperformer/errors.hpp"

namespace hyperformer {
namespace {

constexpr const char* kMagic = "HYPERFORMER";
constexpr const char* kVersion = "v1";

void write_doubles(std::ostream& out, std::span<const double> values) {
  std::array<char, 8> bytes{};
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    out.write(bytes.data(), 8);
  }
}

void read_doubles(std::istream& in, std::span<double> values, const std::string& section) {
  std::array<char, 8> bytes{};
  for (double& v : values) {
    if (!in.read(bytes.data(), 8)) {
      throw DataError("checkpoint: truncated data in section '" + section + "'");
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
    }
    v = std::bit_cast<double>(bits);
  }
}

struct Section {
  std::string name;
  Matrix value;
};

Section read_section(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint: missing section header");
  std::istringstream header(line);
  Section s;
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(header >> s.name >> rows >> cols)) {
    throw DataError("checkpoint: malformed section header '" + line + "'");
  }
  s.value = Matrix(rows, cols);
  read_doubles(in, s.value.values(), s.name);
  return s;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelState& state) {
  const auto& c = state.config;
  out << kMagic << ' ' << kVersion << ' ' << state.vocabulary_size() << ' ' << c.d << ' '
      << c.layers << ' ' << c.fields << ' ' << to_string(c.head) << ' ' << (c.scale_scores ? 1 : 0)
      << ' ' << (c.use_ffn ? 1 : 0) << '\n';
  for (const auto& p : state.parameters()) {
    out << p.name << ' ' << p.value->rows() << ' ' << p.value->cols() << '\n';
    write_doubles(out, p.value->values());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  save_checkpoint(out, state);
  if (!out) throw DataError("write failed for checkpoint '" + path.string() + "'");
}

ModelState load_checkpoint(std::istream& in, bool message_passing) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint: empty file");
  std::istringstream header(line);
  std::string magic, version, head_name;
  std::size_t n = 0;
  int scale = 0;
  int ffn = 0;
  ModelConfig config;
  if (!(header >> magic >> version >> n >> config.d >> config.layers >> config.fields >>
        head_name >> scale >> ffn) ||
      magic != kMagic) {
    throw DataError("checkpoint: malformed header '" + line + "'");
  }
  if (version != kVersion) throw DataError("checkpoint: unsupported version '" + version + "'");
  config.head = parse_head_kind(head_name);
  config.scale_scores = scale != 0;
  config.use_ffn = ffn != 0;
  config.message_passing = message_passing;

  std::vector<Section> sections;
  while (in.peek() != std::char_traits<char>::eof()) sections.push_back(read_section(in));

  // Head widths come from the first head sections.
  auto find = [&](const std::string& name) -> const Matrix* {
    for (const auto& s : sections) {
      if (s.name == name) return &s.value;
    }
    return nullptr;
  };
  auto require = [&](const std::string& name) -> const Matrix& {
    const Matrix* m = find(name);
    if (!m) throw DataError("checkpoint: missing section '" + name + "'");
    return *m;
  };
  switch (config.head) {
    case HeadKind::mlp:
      config.hidden = require("head.w1").cols();
      break;
    case HeadKind::two_tower: {
      const Matrix& w1 = require("head.user_w1");
      config.hidden = w1.cols();
      config.tower_width = require("head.user_w2").cols();
      if (config.d == 0 || w1.rows() % config.d != 0) {
        throw DataError("checkpoint: user tower width is not a multiple of d");
      }
      config.user_fields = w1.rows() / config.d;
      break;
    }
    default:
      break;
  }

  ModelState state = ModelState::allocate(config, n);
  auto params = state.parameters();
  if (params.size() != sections.size()) {
    throw DataError("checkpoint: expected " + std::to_string(params.size()) + " sections, found " +
                    std::to_string(sections.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].name != sections[k].name) {
      throw DataError("checkpoint: expected section '" + params[k].name + "', found '" +
                      sections[k].name + "'");
    }
    if (!params[k].value->same_shape(sections[k].value)) {
      throw DataError("checkpoint: section '" + params[k].name + "' has shape " +
                      sections[k].value.shape_string() + ", expected " +
                      params[k].value->shape_string());
    }
    *params[k].value = std::move(sections[k].value);
  }
  return state;
}

ModelState load_checkpoint(const std::filesystem::path& path, bool message_passing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in, message_passing);
}

}  // namespace hyperformer
