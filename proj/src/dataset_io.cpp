#include "fafscreen/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fafscreen/text_format.hpp"

namespace faf {

namespace {

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_label(Label label) { return label == Label::Diseased ? "1" : "-1"; }

Label parse_label(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  if (cell == "1" || cell == "+1") return Label::Diseased;
  if (cell == "-1") return Label::Healthy;
  throw DataError("line " + std::to_string(line) + ": label '" + std::string(cell) +
                  "' outside {+1, -1}");
}

Disease parse_disease_cell(std::string_view cell, std::size_t line) {
  const auto d = parse_disease(trim(cell));
  if (!d) throw DataError("line " + std::to_string(line) + ": unknown disease '" + std::string(cell) + "'");
  return *d;
}

double parse_number_cell(std::string_view cell, std::size_t line, std::string_view column) {
  const auto v = parse_double(cell);
  if (!v) throw DataError("line " + std::to_string(line) + ": non-numeric value '" + std::string(cell) +
                          "' in column " + std::string(column));
  return *v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::string feature_table_header() {
  std::string h = "id,label,disease";
  for (const auto& name : feature_names()) h += "," + name;
  return h;
}

std::string format_feature_row(const LabeledSample& sample) {
  if (sample.features.size() != kFeatureCount)
    throw InvalidArgument("feature row '" + sample.id + "' must have 18 values");
  std::string row = csv_escape(sample.id) + "," + format_label(sample.label) + "," +
                    std::string(to_string(sample.disease));
  for (double v : sample.features) row += "," + format_double(v);
  return row;
}

std::string write_features(const Dataset& table) {
  std::set<std::string> seen;
  std::string out = feature_table_header() + "\n";
  for (const auto& s : table.samples) {
    if (!seen.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
    out += format_feature_row(s) + "\n";
  }
  return out;
}

Dataset read_features(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw DataError("feature table: empty document");
  if (trim(lines.front()) != feature_table_header())
    throw DataError("feature table: header mismatch; expected '" + feature_table_header() + "'");
  Dataset table;
  std::set<std::string> seen;
  const auto& names = feature_names();
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split_csv_line(lines[ln]);
    const std::size_t line_no = ln + 1;
    if (cells.size() != 3 + kFeatureCount)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(3 + kFeatureCount) +
                      " cells, found " + std::to_string(cells.size()));
    LabeledSample s;
    s.id = cells[0];
    if (!seen.insert(s.id).second) throw DataError("line " + std::to_string(line_no) + ": duplicate id '" + s.id + "'");
    s.label = parse_label(cells[1], line_no);
    s.disease = parse_disease_cell(cells[2], line_no);
    if ((s.label == Label::Healthy) != (s.disease == Disease::NONE))
      throw DataError("line " + std::to_string(line_no) + ": label -1 requires disease NONE and vice versa");
    s.features.reserve(kFeatureCount);
    for (std::size_t k = 0; k < kFeatureCount; ++k)
      s.features.push_back(parse_number_cell(cells[3 + k], line_no, names[k]));
    table.samples.push_back(std::move(s));
  }
  table.validate();
  return table;
}

Dataset read_features_file(const std::filesystem::path& path) { return read_features(read_text_file(path)); }

void write_features_file(const std::filesystem::path& path, const Dataset& table) {
  write_text_file(path, write_features(table));
}

std::string manifest_header() { return "filename,label,disease,cx,cy,r1,r2,r3,laterality"; }

std::string write_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = manifest_header() + "\n";
  for (const auto& e : entries) {
    out += csv_escape(e.filename) + "," + format_label(e.label) + "," + std::string(to_string(e.disease)) +
           "," + format_double(e.grid.center_x) + "," + format_double(e.grid.center_y) + "," +
           format_double(e.grid.r1) + "," + format_double(e.grid.r2) + "," + format_double(e.grid.r3) + "," +
           std::string(to_string(e.grid.laterality)) + "\n";
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty() || trim(lines.front()) != manifest_header())
    throw DataError("manifest: header mismatch; expected '" + manifest_header() + "'");
  std::vector<ManifestEntry> entries;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split_csv_line(lines[ln]);
    const std::size_t line_no = ln + 1;
    if (cells.size() != 9) throw DataError("manifest line " + std::to_string(line_no) + ": expected 9 cells");
    ManifestEntry e;
    e.filename = cells[0];
    e.label = parse_label(cells[1], line_no);
    e.disease = parse_disease_cell(cells[2], line_no);
    e.grid.center_x = parse_number_cell(cells[3], line_no, "cx");
    e.grid.center_y = parse_number_cell(cells[4], line_no, "cy");
    e.grid.r1 = parse_number_cell(cells[5], line_no, "r1");
    e.grid.r2 = parse_number_cell(cells[6], line_no, "r2");
    e.grid.r3 = parse_number_cell(cells[7], line_no, "r3");
    const auto lat = parse_laterality(trim(cells[8]));
    if (!lat || *lat == Laterality::Unknown)
      throw DataError("manifest line " + std::to_string(line_no) + ": laterality must be OD or OS");
    e.grid.laterality = *lat;
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<InputRow> read_input_rows(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw DataError("input table: empty document");
  const auto header = split_csv_line(lines.front());
  if (header.empty() || trim(header[0]) != "id") throw DataError("input table: first column must be 'id'");
  std::size_t first = 1;
  if (first < header.size() && trim(header[first]) == "label") ++first;
  if (first < header.size() && trim(header[first]) == "disease") ++first;
  if (first == header.size()) throw DataError("input table: no value columns");
  std::vector<InputRow> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split_csv_line(lines[ln]);
    const std::size_t line_no = ln + 1;
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    InputRow row{cells[0], {}};
    for (std::size_t k = first; k < cells.size(); ++k) {
      const double v = parse_number_cell(cells[k], line_no, header[k]);
      if (!std::isfinite(v)) throw DataError("line " + std::to_string(line_no) + ": non-finite value");
      row.values.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace faf
