#include "meshcal/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace meshcal::io {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool is_absent_token(std::string t) {
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return t == "-" || t == "nan";
}

double parse_number(const std::string& tok, int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + tok + "'", lineno);
  }
}

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

int DatasetFile::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

DatasetFile parse_dataset(std::istream& in) {
  DatasetFile data;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  int n = 0;
  bool saw_asymmetry = false;
  bool saw_diagonal = false;

  auto next_line = [&](std::string& out) -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    out = trim(line);
    return true;
  };

  // Reads the N body rows of a section that has just been announced.
  auto read_rows = [&](int rows) {
    std::vector<std::vector<std::string>> out;
    std::string row;
    for (int r = 0; r < rows; ++r) {
      if (!next_line(row))
        throw ParseError("unexpected end of file inside a section", lineno);
      if (row.empty())
        throw ParseError("unexpected blank line inside a section", lineno);
      out.push_back(split_ws(row));
    }
    return out;
  };

  std::string text;
  while (next_line(text)) {
    if (text.empty()) continue;

    if (text.rfind("# nodes:", 0) == 0) {
      if (have_header) throw ParseError("duplicate '# nodes:' header", lineno);
      data.labels = split_ws(text.substr(8));
      if (data.labels.empty())
        throw ParseError("'# nodes:' lists no labels", lineno);
      n = static_cast<int>(data.labels.size());
      have_header = true;
      continue;
    }

    if (text.rfind("# visibility", 0) == 0) {
      if (!have_header)
        throw ParseError("'# visibility' before '# nodes:' header", lineno);
      VisibilityMatrix vis(n, true);
      auto rows = read_rows(n);
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
          throw DimensionMismatch("visibility row " + std::to_string(i + 1) +
                                  " has " + std::to_string(rows[i].size()) +
                                  " entries, expected " + std::to_string(n));
        for (int j = 0; j < n; ++j) {
          if (rows[i][j] != "0" && rows[i][j] != "1")
            throw ParseError("visibility entries must be 0 or 1", lineno);
          if (i < j) vis.set(i, j, rows[i][j] == "1");
        }
      }
      data.visibility = std::move(vis);
      continue;
    }

    if (text.rfind("# truth", 0) == 0) {
      if (!have_header)
        throw ParseError("'# truth' before '# nodes:' header", lineno);
      std::vector<Position2D> truth;
      auto rows = read_rows(n);
      for (int i = 0; i < n; ++i) {
        if (rows[i].size() != 2)
          throw ParseError("truth rows carry exactly 'x y'", lineno);
        truth.emplace_back(parse_number(rows[i][0], lineno),
                           parse_number(rows[i][1], lineno));
      }
      data.ground_truth = std::move(truth);
      continue;
    }

    if (text[0] == '#') continue;  // plain comment

    if (text.rfind("t=", 0) == 0) {
      if (!have_header)
        throw ParseError("epoch record before '# nodes:' header", lineno);
      const double t = parse_number(text.substr(2), lineno);
      DistanceMatrix raw(t, n);
      auto rows = read_rows(n);
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
          throw ParseError("matrix row has " + std::to_string(rows[i].size()) +
                               " entries, expected " + std::to_string(n),
                           lineno);
        for (int j = 0; j < n; ++j) {
          const std::string& tok = rows[i][j];
          if (is_absent_token(tok)) continue;
          const double v = parse_number(tok, lineno);
          if (i == j) {
            if (v != 0.0) saw_diagonal = true;
            continue;  // diagonal readings are never used
          }
          if (v < 0.0) throw ParseError("negative range '" + tok + "'", lineno);
          raw.set(i, j, v);
        }
      }
      // detect one-sided or unequal mirror entries before symmetrizing
      if (!saw_asymmetry) {
        for (int i = 0; i < n && !saw_asymmetry; ++i)
          for (int j = i + 1; j < n && !saw_asymmetry; ++j) {
            if (raw.has(i, j) != raw.has(j, i))
              saw_asymmetry = true;
            else if (raw.has(i, j) && raw.at(i, j) != raw.at(j, i))
              saw_asymmetry = true;
          }
      }
      DistanceMatrix m = symmetrize(raw);
      m.validate();
      data.records.push_back(std::move(m));
      continue;
    }

    throw ParseError("unrecognized line '" + text + "'", lineno);
  }

  if (!have_header) throw ParseError("missing '# nodes:' header", lineno);

  if (saw_asymmetry)
    data.warnings.push_back("asymmetric raw entries were symmetrized on load");
  if (saw_diagonal)
    data.warnings.push_back("nonzero diagonal readings were dropped");

  bool monotone = true;
  for (std::size_t k = 1; k < data.records.size(); ++k)
    if (data.records[k].epoch() < data.records[k - 1].epoch()) {
      monotone = false;
      break;
    }
  if (!monotone) {
    std::stable_sort(data.records.begin(), data.records.end(),
                     [](const DistanceMatrix& a, const DistanceMatrix& b) {
                       return a.epoch() < b.epoch();
                     });
    data.warnings.push_back("non-monotone timestamps were reordered");
  }
  return data;
}

DatasetFile parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  return parse_dataset(in);
}

void write_dataset(const DatasetFile& data, std::ostream& out) {
  const int n = data.node_count();
  out << "# nodes:";
  for (const auto& l : data.labels) out << ' ' << l;
  out << '\n';

  if (data.visibility) {
    out << "# visibility\n";
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        out << (j ? " " : "") << (data.visibility->los(i, j) ? '1' : '0');
      out << '\n';
    }
  }
  if (data.ground_truth) {
    out << "# truth\n";
    for (const auto& p : *data.ground_truth)
      out << fmt4(p.x) << ' ' << fmt4(p.y) << '\n';
  }
  for (const auto& m : data.records) {
    out << "t=" << fmt4(m.epoch()) << '\n';
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (j) out << ' ';
        if (i == j)
          out << "0.0000";
        else if (m.has(i, j))
          out << fmt4(m.at(i, j));
        else
          out << '-';
      }
      out << '\n';
    }
  }
}

void write_dataset_file(const DatasetFile& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_dataset(data, out);
  out.flush();
  if (!out) throw Error("write failed for '" + path + "'");
}

std::vector<Position2D> transform_ground_truth(
    const std::vector<Position2D>& raw_positions,
    const cf::FrameAssumptions& frame) {
  const int n = static_cast<int>(raw_positions.size());
  const int o = frame.origin_node.index;
  const int a = frame.axis_node.index;
  const int h = frame.halfplane_node.index;
  if (o < 0 || a < 0 || h < 0 || o >= n || a >= n || h >= n)
    throw Error("frame node index out of range");

  const Position2D origin = raw_positions[o];
  const Position2D axis = raw_positions[a] - origin;
  const double d = axis.norm();
  if (d < 1e-12)
    throw DegenerateFrame("origin and axis nodes coincide");
  const double c = axis.x / d;
  const double s = axis.y / d;

  std::vector<Position2D> out;
  out.reserve(n);
  for (const auto& p : raw_positions) {
    const Position2D q = p - origin;
    // rotate by -angle(axis): maps the axis node onto (d, 0)
    out.emplace_back(c * q.x + s * q.y, -s * q.x + c * q.y);
  }
  if (out[h].y < 0.0)
    for (auto& p : out) p.y = -p.y;
  return out;
}

}  // namespace meshcal::io
