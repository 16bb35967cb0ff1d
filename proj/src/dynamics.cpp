#include "dissipnet/dynamics.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dissipnet {

std::vector<double> euler_step(const ProjectedModel& m, std::span<const double> x, std::span<const double> u,
                               double dt) {
  const auto ev = evaluator(m);
  return euler_step<double>(ev, x, u, dt);
}

namespace {

Trajectory pack(const std::vector<std::vector<double>>& xs, const std::vector<std::vector<double>>& ys,
                const Matrix& u, double dt) {
  Trajectory t;
  const std::size_t rows = xs.size();
  t.times.resize(rows);
  for (std::size_t k = 0; k < rows; ++k) t.times[k] = static_cast<double>(k) * dt;
  const std::size_t n = rows ? xs[0].size() : 0, l = rows ? ys[0].size() : 0;
  t.x = Matrix(rows, n);
  t.y = Matrix(rows, l);
  for (std::size_t k = 0; k < rows; ++k) {
    std::copy(xs[k].begin(), xs[k].end(), t.x.row(k).begin());
    std::copy(ys[k].begin(), ys[k].end(), t.y.row(k).begin());
  }
  t.u = u;
  return t;
}

}  // namespace

Trajectory simulate(const ProjectedModel& m, const Matrix& u, const SimConfig& cfg) {
  const auto ev = evaluator(m);
  std::vector<std::vector<double>> xs, ys;
  rollout<double>(ev, u, cfg, xs, ys);
  return pack(xs, ys, u, cfg.dt);
}

Trajectory simulate(const VectorField& sys, const Matrix& u, const SimConfig& cfg) {
  if (u.rows() != cfg.horizon || u.cols() != sys.m) throw DimensionMismatch("input signal shape");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  std::vector<double> x = cfg.x0.empty() ? std::vector<double>(sys.n, 0.0) : cfg.x0;
  if (x.size() != sys.n) throw DimensionMismatch("x0 length");
  std::vector<std::vector<double>> xs, ys;
  for (std::size_t k = 0; k <= cfg.horizon; ++k) {
    const auto uk = input_at(u, k);
    ys.push_back(sys.output(x, uk));
    xs.push_back(x);
    if (k == cfg.horizon) break;
    const auto v = sys.drift(x, uk);
    for (std::size_t i = 0; i < sys.n; ++i) x[i] += cfg.dt * v[i];
    if (state_diverged<double>(x)) throw NonFiniteState(k + 1, "state left the finite region");
  }
  return pack(xs, ys, u, cfg.dt);
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string trajectory_to_csv(const Trajectory& t, bool with_states) {
  const std::size_t m = t.u.cols(), l = t.y.cols(), n = with_states ? t.x.cols() : 0;
  if (with_states && !t.has_states()) throw MissingStates("trajectory has no states to export");
  std::string out = "t";
  for (std::size_t i = 1; i <= m; ++i) out += ",u_" + std::to_string(i);
  for (std::size_t i = 1; i <= l; ++i) out += ",y_" + std::to_string(i);
  for (std::size_t i = 1; i <= n; ++i) out += ",x_" + std::to_string(i);
  out += '\n';
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    append_number(out, t.times[k]);
    for (double v : input_at(t.u, k)) {
      out += ',';
      append_number(out, v);
    }
    for (double v : t.y.row(k)) {
      out += ',';
      append_number(out, v);
    }
    if (n)
      for (double v : t.x.row(k)) {
        out += ',';
        append_number(out, v);
      }
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.empty() || header[0] != "t") throw FormatError(source + ": header must start with 't'");

  // Columns must appear as u_1..u_m, y_1..y_l, x_1..x_n in this order.
  std::size_t m = 0, l = 0, n = 0;
  char stage = 'u';
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto h = header[c];
    if (h.size() < 3 || h[1] != '_') throw FormatError(source + ": bad header column " + std::to_string(c + 1));
    const char kind = h[0];
    std::size_t* count = kind == 'u' ? &m : kind == 'y' ? &l : kind == 'x' ? &n : nullptr;
    if (!count || (kind == 'u' && stage != 'u') || (kind == 'y' && stage == 'x')) {
      throw FormatError(source + ": unexpected header column '" + std::string(h) + "'");
    }
    stage = kind;
    if (h.substr(2) != std::to_string(*count + 1)) {
      throw FormatError(source + ": header column '" + std::string(h) + "' out of sequence");
    }
    ++*count;
  }
  if (m == 0 || l == 0) throw FormatError(source + ": header needs at least one u and one y column");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    const std::size_t row = rows.size();
    if (cells.size() != header.size()) {
      throw FormatError(source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) + ") has " +
                        std::to_string(cells.size()) + " columns, header has " + std::to_string(header.size()));
    }
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = cells[c];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), vals[c]);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(vals[c])) {
        throw FormatError(source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                          "), column " + std::to_string(c + 1) + ": not a finite number: '" + std::string(cell) + "'");
      }
    }
    rows.push_back(std::move(vals));
  }
  if (rows.size() < 2) throw FormatError(source + ": need at least two rows");

  Trajectory t;
  const std::size_t count = rows.size();
  t.times.resize(count);
  t.u = Matrix(count - 1, m);
  t.y = Matrix(count, l);
  if (n) t.x = Matrix(count, n);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& r = rows[k];
    t.times[k] = r[0];
    if (k + 1 < count)
      for (std::size_t i = 0; i < m; ++i) t.u(k, i) = r[1 + i];
    for (std::size_t i = 0; i < l; ++i) t.y(k, i) = r[1 + m + i];
    for (std::size_t i = 0; i < n; ++i) t.x(k, i) = r[1 + m + l + i];
  }
  return t;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& t, bool with_states) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << trajectory_to_csv(t, with_states);
  if (!out) throw IoError("write failed: " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return trajectory_from_csv(ss.str(), path.string());
}

}  // namespace dissipnet
