#include "mlem/io.hpp"

#include "json.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mlem {

namespace {

constexpr std::string_view kReprMagic = "MLEMREPR";
constexpr std::uint32_t kReprVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary representation IO assumes a little-endian host");

bool is_missing_token(std::string_view s) { return s.empty() || s == "NaN"; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

template <typename T>
T read_le(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void append_le(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    // A blank line is not a record.
    if (!(record.size() == 1 && record[0].empty() && !field_started)) {
      records.push_back(std::move(record));
    }
    record.clear();
    field_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw InputError("malformed CSV: stray quote on line " + std::to_string(line));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw InputError("malformed CSV: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".schema.json");
  return p;
}

FeatureSchema parse_schema_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed schema JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("schema JSON must be an object");
  FeatureSchema schema;
  for (const auto& [name, kind] : j.items()) {
    if (!kind.is_string()) throw InputError("schema entry '" + name + "' must be a string");
    schema[name] = parse_feature_kind(kind.get<std::string>());
  }
  return schema;
}

FeatureTable parse_feature_csv(std::string_view text, const FeatureSchema& schema) {
  const auto records = parse_csv_records(text);
  if (records.empty()) throw InputError("feature CSV is empty");
  const auto& header = records.front();
  if (header.size() < 2) {
    throw InputError("feature CSV header needs stimulus_id and at least one feature");
  }
  const std::size_t width = header.size();
  const std::size_t n = records.size() - 1;

  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw InputError("feature CSV row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " fields, expected " +
                       std::to_string(width));
    }
    ids.push_back(records[r][0]);
  }

  std::vector<FeatureColumn> columns;
  for (std::size_t c = 1; c < width; ++c) {
    const std::string name(trim(header[c]));
    std::vector<std::optional<double>> numbers(n);
    bool all_numeric = true;
    bool any_present = false;
    for (std::size_t r = 0; r < n; ++r) {
      const std::string_view cell = trim(records[r + 1][c]);
      if (is_missing_token(cell)) continue;
      any_present = true;
      numbers[r] = parse_number(cell);
      if (!numbers[r] || !std::isfinite(*numbers[r])) all_numeric = false;
    }

    FeatureKind kind;
    if (auto it = schema.find(name); it != schema.end()) {
      kind = it->second;
    } else {
      kind = (all_numeric && any_present) ? FeatureKind::Ordinal : FeatureKind::Nominal;
    }

    if (kind == FeatureKind::Ordinal) {
      if (!all_numeric) {
        throw InputError("ordinal feature '" + name + "' has a non-numeric value");
      }
      columns.push_back(FeatureColumn::ordinal(name, numbers));
    } else {
      std::vector<std::optional<std::string>> labels(n);
      for (std::size_t r = 0; r < n; ++r) {
        const std::string_view cell = trim(records[r + 1][c]);
        if (!is_missing_token(cell)) labels[r] = std::string(cell);
      }
      columns.push_back(FeatureColumn::nominal(name, labels));
    }
  }
  return FeatureTable(std::move(ids), std::move(columns));
}

FeatureTable load_feature_table(const std::filesystem::path& path,
                                const FeatureSchema& overrides) {
  FeatureSchema schema;
  const auto sidecar = schema_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) schema = parse_schema_json(read_file(sidecar));
  for (const auto& [name, kind] : overrides) schema[name] = kind;
  return parse_feature_csv(read_file(path), schema);
}

std::string format_feature_csv(const FeatureTable& table) {
  std::string out = "stimulus_id";
  for (const auto& f : table.features()) out += "," + quote_csv(f.name);
  out += "\n";
  for (Index i = 0; i < table.num_stimuli(); ++i) {
    out += quote_csv(table.stimulus_ids()[static_cast<std::size_t>(i)]);
    for (const auto& f : table.features()) {
      out += ",";
      if (f.missing(i)) {
        out += "NaN";
      } else if (f.kind == FeatureKind::Nominal) {
        out += quote_csv(f.categories[static_cast<std::size_t>(f.values[i])]);
      } else {
        out += format_double(f.values[i]);
      }
    }
    out += "\n";
  }
  return out;
}

std::string format_schema_json(const FeatureTable& table) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : table.features()) j[f.name] = std::string(to_string(f.kind));
  return j.dump(2) + "\n";
}

RepresentationSet parse_representations_binary(std::string_view bytes) {
  constexpr std::size_t header = 8 + 4 + 8 + 8;
  if (bytes.size() < header || !bytes.starts_with(kReprMagic)) {
    throw InputError("not an MLEMREPR file");
  }
  const auto version = read_le<std::uint32_t>(bytes, 8);
  if (version != kReprVersion) {
    throw InputError("unsupported MLEMREPR version " + std::to_string(version));
  }
  const auto n = read_le<std::uint64_t>(bytes, 12);
  const auto d = read_le<std::uint64_t>(bytes, 20);
  if (n == 0 || d == 0 || n > (bytes.size() / 8) || d > (bytes.size() / 8) ||
      bytes.size() != header + n * d * 8) {
    throw InputError("MLEMREPR payload size does not match header");
  }
  Eigen::MatrixXd m(static_cast<Index>(n), static_cast<Index>(d));
  std::size_t off = header;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j, off += 8) m(i, j) = read_le<double>(bytes, off);
  }
  return RepresentationSet(std::move(m));
}

RepresentationSet parse_representations_csv(std::string_view text) {
  const auto records = parse_csv_records(text);
  if (records.empty()) throw InputError("representation CSV is empty");
  const std::size_t d = records.front().size();
  Eigen::MatrixXd m(static_cast<Index>(records.size()), static_cast<Index>(d));
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != d) {
      throw InputError("representation CSV row " + std::to_string(r + 1) +
                       " has " + std::to_string(records[r].size()) +
                       " columns, expected " + std::to_string(d));
    }
    for (std::size_t c = 0; c < d; ++c) {
      const auto v = parse_number(records[r][c]);
      if (!v) {
        throw InputError("representation CSV row " + std::to_string(r + 1) +
                         " has a non-numeric value");
      }
      m(static_cast<Index>(r), static_cast<Index>(c)) = *v;
    }
  }
  return RepresentationSet(std::move(m));
}

RepresentationSet load_representations(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (std::string_view(bytes).starts_with(kReprMagic)) {
    return parse_representations_binary(bytes);
  }
  return parse_representations_csv(bytes);
}

std::string format_representations_binary(const RepresentationSet& reps) {
  std::string out(kReprMagic);
  append_le<std::uint32_t>(out, kReprVersion);
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(reps.num_stimuli()));
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(reps.dim()));
  out.reserve(out.size() + static_cast<std::size_t>(reps.matrix().size()) * 8);
  for (Index i = 0; i < reps.num_stimuli(); ++i) {
    for (Index j = 0; j < reps.dim(); ++j) append_le<double>(out, reps.matrix()(i, j));
  }
  return out;
}

std::string format_representations_csv(const RepresentationSet& reps) {
  std::string out;
  for (Index i = 0; i < reps.num_stimuli(); ++i) {
    for (Index j = 0; j < reps.dim(); ++j) {
      if (j) out += ',';
      out += format_double(reps.matrix()(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mlem
