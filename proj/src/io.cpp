#include "sdl/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sdl/errors.hpp"

namespace sdl {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_double(const std::string& tok, const std::string& path, int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
  }
}

int parse_label(const std::string& tok, const std::string& path, int lineno) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(lineno) + ": bad label '" + tok + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  return out;
}

json config_to_json(const SdlConfig& c) {
  return json{{"num_atoms", c.num_atoms},
              {"eta", c.eta},
              {"tol", c.tol},
              {"max_iters", c.max_iters},
              {"divergence", to_string(c.divergence)},
              {"smoothing_eps", c.smoothing_eps},
              {"seed", c.seed},
              {"sparsity_threshold", c.sparsity_threshold},
              {"backtracking", c.backtracking}};
}

SdlConfig config_from_json(const json& j) {
  SdlConfig c;
  c.num_atoms = j.at("num_atoms").get<int>();
  c.eta = j.at("eta").get<double>();
  c.tol = j.at("tol").get<double>();
  c.max_iters = j.at("max_iters").get<int>();
  c.divergence = divergence_from_string(j.at("divergence").get<std::string>());
  c.smoothing_eps = j.at("smoothing_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.sparsity_threshold = j.at("sparsity_threshold").get<double>();
  c.backtracking = j.at("backtracking").get<bool>();
  return c;
}

json load_json_file(const std::string& path, const std::string& expected_format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != expected_format)
    throw IoError(path + ": not a " + expected_format + " file");
  return j;
}

}  // namespace

DensityDataset load_density_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open density file: " + path);
  DensityDataset ds;
  Eigen::Index header_bins = 0;
  std::string line;
  int lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (first && line.rfind("# bins=", 0) == 0) {
      header_bins = static_cast<Eigen::Index>(parse_label(line.substr(7), path, lineno));
      if (header_bins < 1) throw IoError(path + ": invalid bins header");
      first = false;
      continue;
    }
    first = false;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    int label = -1;
    if (header_bins > 0) {
      if (static_cast<Eigen::Index>(tokens.size()) == header_bins + 1) {
        label = parse_label(tokens.back(), path, lineno);
        tokens.pop_back();
      }
      if (static_cast<Eigen::Index>(tokens.size()) != header_bins)
        throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header_bins) +
                      " values per row");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(tokens.size()));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      v[static_cast<Eigen::Index>(t)] = parse_double(tokens[t], path, lineno);
      if (v[static_cast<Eigen::Index>(t)] < 0.0)
        throw IoError(path + ":" + std::to_string(lineno) + ": negative density value");
    }
    const double sum = v.sum();
    if (std::abs(sum - 1.0) > 1e-6)
      throw IoError(path + ":" + std::to_string(lineno) + ": row sum deviates from 1 by more than 1e-6");
    v /= sum;
    if (ds.bins == 0) ds.bins = v.size();
    if (v.size() != ds.bins)
      throw IoError(path + ":" + std::to_string(lineno) + ": inconsistent bin count");
    ds.densities.emplace_back(std::move(v));
    ds.labels.push_back(label);
  }
  if (ds.densities.empty()) throw IoError(path + ": no density rows");
  if (header_bins > 0 && ds.bins != header_bins)
    throw IoError(path + ": bins header does not match rows");
  return ds;
}

void save_density_file(const std::string& path, const std::vector<DiscreteDensity>& densities,
                       const std::vector<int>* labels) {
  if (densities.empty()) throw ParameterError("save_density_file: empty dataset");
  if (labels && labels->size() != densities.size())
    throw DimensionError("save_density_file: label count mismatch");
  std::ofstream out = open_out(path);
  out << "# bins=" << densities.front().bins() << "\n";
  for (std::size_t i = 0; i < densities.size(); ++i) {
    const Eigen::VectorXd& v = densities[i].values();
    for (Eigen::Index x = 0; x < v.size(); ++x) {
      if (x) out << ' ';
      out << fmt17(v[x]);
    }
    if (labels) out << ' ' << (*labels)[i];
    out << '\n';
  }
  if (!out) throw IoError("short write on " + path);
}

SpdDataset load_spd_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spd file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  std::vector<std::string> header = tokenize(line);
  if (header.size() != 3 || header[0] != "spd")
    throw IoError(path + ": expected header 'spd <n> <N>'");
  const Eigen::Index n = parse_label(header[1], path, 1);
  const Eigen::Index count = parse_label(header[2], path, 1);
  if (n < 1 || count < 1) throw IoError(path + ": invalid spd header");
  SpdDataset ds;
  ds.dim = n;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    int label = -1;
    if (static_cast<Eigen::Index>(tokens.size()) == n * n + 1) {
      label = parse_label(tokens.back(), path, lineno);
      tokens.pop_back();
    }
    if (static_cast<Eigen::Index>(tokens.size()) != n * n)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(n * n) +
                    " values per row");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index row = 0; row < n; ++row)
      for (Eigen::Index col = 0; col < n; ++col)
        m(row, col) = parse_double(tokens[static_cast<std::size_t>(row * n + col)], path, lineno);
    try {
      ds.matrices.emplace_back(m);
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ds.labels.push_back(label);
  }
  if (static_cast<Eigen::Index>(ds.matrices.size()) != count)
    throw IoError(path + ": header count " + std::to_string(count) + " does not match " +
                  std::to_string(ds.matrices.size()) + " rows");
  return ds;
}

void save_spd_file(const std::string& path, const std::vector<SpdMatrix>& matrices,
                   const std::vector<int>* labels) {
  if (matrices.empty()) throw ParameterError("save_spd_file: empty dataset");
  if (labels && labels->size() != matrices.size())
    throw DimensionError("save_spd_file: label count mismatch");
  const Eigen::Index n = matrices.front().dim();
  std::ofstream out = open_out(path);
  out << "spd " << n << " " << matrices.size() << "\n";
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const Eigen::MatrixXd& m = matrices[i].matrix();
    if (m.rows() != n) throw DimensionError("save_spd_file: mixed dimensions");
    bool space = false;
    for (Eigen::Index row = 0; row < n; ++row) {
      for (Eigen::Index col = 0; col < n; ++col) {
        if (space) out << ' ';
        out << fmt17(m(row, col));
        space = true;
      }
    }
    if (labels) out << ' ' << (*labels)[i];
    out << '\n';
  }
  if (!out) throw IoError("short write on " + path);
}

void save_codes_file(const std::string& path, const CodeMatrix& codes) {
  std::vector<DiscreteDensity> rows;
  rows.reserve(static_cast<std::size_t>(codes.samples()));
  for (Eigen::Index i = 0; i < codes.samples(); ++i) {
    Eigen::VectorXd v = codes.row(i);
    v /= v.sum();
    rows.emplace_back(std::move(v));
  }
  save_density_file(path, rows, nullptr);
}

CodeMatrix load_codes_file(const std::string& path) {
  const DensityDataset ds = load_density_file(path);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(ds.densities.size()), ds.bins);
  for (std::size_t i = 0; i < ds.densities.size(); ++i)
    w.row(static_cast<Eigen::Index>(i)) = ds.densities[i].values().transpose();
  return CodeMatrix(std::move(w));
}

void save_density_model(const std::string& path, const DensityModel& model) {
  json atoms = json::array();
  for (const auto& a : model.dictionary.atoms()) {
    json row = json::array();
    for (Eigen::Index x = 0; x < a.bins(); ++x) row.push_back(a[x]);
    atoms.push_back(std::move(row));
  }
  const json j{{"format", "sdl-density-model"},
               {"version", 1},
               {"bins", model.dictionary.bins()},
               {"num_atoms", model.dictionary.size()},
               {"atoms", std::move(atoms)},
               {"config", config_to_json(model.config)},
               {"seed", model.config.seed},
               {"fit",
                {{"final_objective", model.final_objective},
                 {"sparsity", model.sparsity},
                 {"iterations", model.iterations},
                 {"converged", model.converged}}}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write on " + path);
}

DensityModel load_density_model(const std::string& path) {
  const json j = load_json_file(path, "sdl-density-model");
  try {
    const Eigen::Index bins = j.at("bins").get<Eigen::Index>();
    std::vector<DiscreteDensity> atoms;
    for (const auto& row : j.at("atoms")) {
      Eigen::VectorXd v(bins);
      if (static_cast<Eigen::Index>(row.size()) != bins) throw IoError(path + ": atom length mismatch");
      for (Eigen::Index x = 0; x < bins; ++x) v[x] = row[static_cast<std::size_t>(x)].get<double>();
      atoms.emplace_back(std::move(v));
    }
    DensityModel model{DensityDictionary(std::move(atoms)), config_from_json(j.at("config")), 0, 0, 0, false};
    model.final_objective = j.at("fit").at("final_objective").get<double>();
    model.sparsity = j.at("fit").at("sparsity").get<double>();
    model.iterations = j.at("fit").at("iterations").get<int>();
    model.converged = j.at("fit").at("converged").get<bool>();
    return model;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(path + ": invalid model: " + e.what());
  }
}

void save_spd_model(const std::string& path, const SpdModel& model) {
  const Eigen::Index n = model.dictionary.dim();
  json atoms = json::array();
  for (const auto& a : model.dictionary.atoms()) {
    json row = json::array();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < n; ++c) row.push_back(a.matrix()(i, c));
    atoms.push_back(std::move(row));
  }
  const json j{{"format", "sdl-spd-model"},
               {"version", 1},
               {"n", n},
               {"num_atoms", model.dictionary.size()},
               {"atoms", std::move(atoms)},
               {"config", config_to_json(model.config)},
               {"seed", model.config.seed},
               {"fit",
                {{"final_objective", model.final_objective},
                 {"sparsity", model.sparsity},
                 {"mean_airm_error", model.mean_airm_error},
                 {"iterations", model.iterations},
                 {"converged", model.converged}}}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write on " + path);
}

SpdModel load_spd_model(const std::string& path) {
  const json j = load_json_file(path, "sdl-spd-model");
  try {
    const Eigen::Index n = j.at("n").get<Eigen::Index>();
    std::vector<SpdMatrix> atoms;
    for (const auto& row : j.at("atoms")) {
      if (static_cast<Eigen::Index>(row.size()) != n * n) throw IoError(path + ": atom length mismatch");
      Eigen::MatrixXd m(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < n; ++c) m(i, c) = row[static_cast<std::size_t>(i * n + c)].get<double>();
      atoms.emplace_back(m);
    }
    SpdModel model{SpdDictionary(std::move(atoms)), config_from_json(j.at("config")), 0, 0, 0, 0, false};
    model.final_objective = j.at("fit").at("final_objective").get<double>();
    model.sparsity = j.at("fit").at("sparsity").get<double>();
    model.mean_airm_error = j.at("fit").at("mean_airm_error").get<double>();
    model.iterations = j.at("fit").at("iterations").get<int>();
    model.converged = j.at("fit").at("converged").get<bool>();
    return model;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(path + ": invalid model: " + e.what());
  }
}

void MetricsRecord::validate() const {
  if (!std::isfinite(objective) || !std::isfinite(sparsity) || !std::isfinite(recon_error) ||
      !std::isfinite(wall_time_s))
    throw InvariantError("MetricsRecord: non-finite field");
  if (sparsity < 0.0 || sparsity > 100.0) throw InvariantError("MetricsRecord: sparsity outside [0,100]");
}

std::string MetricsRecord::to_json() const {
  validate();
  const json j{{"mode", mode},          {"objective", objective},   {"sparsity", sparsity},
               {"recon_error", recon_error}, {"iterations", iterations}, {"seed", seed},
               {"converged", converged}};
  return j.dump();
}

std::string MetricsRecord::to_text() const {
  validate();
  std::ostringstream out;
  out << "mode:         " << mode << "\n"
      << "objective:    " << fmt17(objective) << "\n"
      << "sparsity:     " << fmt17(sparsity) << " %\n"
      << "recon_error:  " << fmt17(recon_error) << "\n"
      << "iterations:   " << iterations << "\n"
      << "seed:         " << seed << "\n"
      << "converged:    " << (converged ? "yes" : "no") << "\n"
      << "wall_time_s:  " << wall_time_s << "\n";
  return out.str();
}

void save_code_table(const std::string& path, const CodeMatrix& codes, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != codes.samples())
    throw DimensionError("save_code_table: label count mismatch");
  std::ofstream out = open_out(path);
  out << "# label";
  for (Eigen::Index j = 0; j < codes.atoms(); ++j) out << " w" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < codes.samples(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < codes.atoms(); ++j) out << ' ' << fmt17(codes.weights()(i, j));
    out << '\n';
  }
  if (!out) throw IoError("short write on " + path);
}

}  // namespace sdl
