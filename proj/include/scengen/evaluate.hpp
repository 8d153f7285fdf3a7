// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/dataset.hpp"
#include "scengen/kde.hpp"
#include "scengen/rng.hpp"

namespace scengen {

/// Symmetric correlation matrix with unit diagonal; rows/columns of constant
/// series are zeroed and recorded in `constant_indices`.
struct CorrelationMatrix {
  int n = 0;
  std::vector<double> values;  // n x n row-major
  std::vector<int> constant_indices;

  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * n + j];
  }

  double frobenius_distance(const CorrelationMatrix& other) const {
    if (n != other.n)
      throw ConfigError("correlation matrices differ in size: " +
                        std::to_string(n) + " vs " + std::to_string(other.n));
    double s = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - other.values[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
};

namespace detail {

// Pearson matrix over `dim` series, each observed `n_obs` times;
// accessor(series, observation) -> value.
template <typename Accessor>
CorrelationMatrix pearson_matrix(int dim, std::size_t n_obs,
                                 Accessor&& accessor) {
  CorrelationMatrix out;
  out.n = dim;
  out.values.assign(static_cast<std::size_t>(dim) * dim, 0.0);

  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> sd(static_cast<std::size_t>(dim), 0.0);
  for (int i = 0; i < dim; ++i) {
    double s = 0;
    for (std::size_t o = 0; o < n_obs; ++o) s += accessor(i, o);
    mean[static_cast<std::size_t>(i)] = s / static_cast<double>(n_obs);
  }
  for (int i = 0; i < dim; ++i) {
    double s = 0;
    for (std::size_t o = 0; o < n_obs; ++o) {
      const double d = accessor(i, o) - mean[static_cast<std::size_t>(i)];
      s += d * d;
    }
    sd[static_cast<std::size_t>(i)] = std::sqrt(s);
    if (s == 0.0) out.constant_indices.push_back(i);
  }
  for (int i = 0; i < dim; ++i) {
    out.values[static_cast<std::size_t>(i) * dim + i] = 1.0;
    for (int j = i + 1; j < dim; ++j) {
      double r = 0.0;
      const double denom =
          sd[static_cast<std::size_t>(i)] * sd[static_cast<std::size_t>(j)];
      if (denom > 0.0) {
        double cov = 0;
        for (std::size_t o = 0; o < n_obs; ++o)
          cov += (accessor(i, o) - mean[static_cast<std::size_t>(i)]) *
                 (accessor(j, o) - mean[static_cast<std::size_t>(j)]);
        r = cov / denom;
      }
      out.values[static_cast<std::size_t>(i) * dim + j] = r;
      out.values[static_cast<std::size_t>(j) * dim + i] = r;
    }
  }
  return out;
}

}  // namespace detail

/// H x H Pearson matrix between time steps, observations pooled over all
/// (sample, farm) pairs.
inline CorrelationMatrix temporal_correlation(const ScenarioDataset& ds) {
  if (ds.size() < 2)
    throw ConfigError("temporal_correlation needs at least 2 samples");
  const int H = ds.horizon;
  const int P = ds.parks();
  const std::size_t n_obs = ds.size() * static_cast<std::size_t>(P);
  return detail::pearson_matrix(H, n_obs, [&](int h, std::size_t o) {
    const std::size_t s = o / static_cast<std::size_t>(P);
    const int p = static_cast<int>(o % static_cast<std::size_t>(P));
    return ds.samples[s][static_cast<std::size_t>(p) * H + h];
  });
}

/// P x P Pearson matrix between farms, observations pooled over all
/// (sample, step) pairs.
inline CorrelationMatrix spatial_correlation(const ScenarioDataset& ds) {
  if (ds.size() < 2)
    throw ConfigError("spatial_correlation needs at least 2 samples");
  const int H = ds.horizon;
  const int P = ds.parks();
  const std::size_t n_obs = ds.size() * static_cast<std::size_t>(H);
  return detail::pearson_matrix(P, n_obs, [&](int p, std::size_t o) {
    const std::size_t s = o / static_cast<std::size_t>(H);
    const int h = static_cast<int>(o % static_cast<std::size_t>(H));
    return ds.samples[s][static_cast<std::size_t>(p) * H + h];
  });
}

/// Per-(sample, farm) integrated power plus a 48-bin histogram over [0, H].
/// Unit step weights: an all-ones hourly wind day integrates to 24.
struct StressResult {
  static constexpr int kBins = 48;
  std::vector<double> integrals;  // sample-major, farm within
  std::vector<long> histogram;
  int horizon = 0;

  double bin_width() const {
    return static_cast<double>(horizon) / static_cast<double>(kBins);
  }
};

inline StressResult stress_integral(const ScenarioDataset& ds) {
  StressResult out;
  out.horizon = ds.horizon;
  out.histogram.assign(StressResult::kBins, 0);
  out.integrals.reserve(ds.size() * static_cast<std::size_t>(ds.parks()));
  const double bw = out.bin_width();
  for (const auto& s : ds.samples)
    for (int p = 0; p < ds.parks(); ++p) {
      double integral = 0;
      for (int h = 0; h < ds.horizon; ++h)
        integral += s[static_cast<std::size_t>(p) * ds.horizon + h];
      out.integrals.push_back(integral);
      int bin = static_cast<int>(integral / bw);
      bin = std::clamp(bin, 0, StressResult::kBins - 1);
      ++out.histogram[static_cast<std::size_t>(bin)];
    }
  return out;
}

/// Sample mean, unbiased variance and adjusted Fisher-Pearson skewness.
struct Moments {
  double mean = 0;
  double variance = 0;
  double skewness = 0;
  bool zero_variance = false;
};

inline Moments moments(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 3) throw ConfigError("moments needs at least 3 values");
  Moments out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(n);
  double m2 = 0, m3 = 0;
  for (double v : values) {
    const double d = v - out.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  out.variance = m2 / static_cast<double>(n - 1);
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (m2 == 0.0) {
    out.zero_variance = true;
    out.skewness = 0.0;
  } else {
    const double g1 = m3 / std::pow(m2, 1.5);
    const double nd = static_cast<double>(n);
    out.skewness = g1 * std::sqrt(nd * (nd - 1.0)) / (nd - 2.0);
  }
  return out;
}

/// I.i.d. uniform [0,1) scenarios with the farm layout of `ref`; the noise
/// floor every model comparison must beat.
inline ScenarioDataset uniform_noise_like(const ScenarioDataset& ref,
                                          std::size_t n_samples,
                                          std::uint64_t seed) {
  ScenarioDataset out;
  out.farms = ref.farms;
  out.horizon = ref.horizon;
  out.resolution_hours = ref.resolution_hours;
  Rng rng(seed);
  const std::size_t len =
      static_cast<std::size_t>(ref.parks()) * static_cast<std::size_t>(ref.horizon);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> sample(len);
    for (auto& v : sample) v = rng.uniform();
    out.samples.push_back(std::move(sample));
  }
  return out;
}

/// The full evaluation battery for one real test set against any number of
/// generated scenario sets.
struct EvalReport {
  double bandwidth = 0.01;
  std::vector<std::string> model_names;

  std::map<std::string, double> kld_global;
  // terrain name -> model name -> symmetric KLD
  std::map<std::string, std::map<std::string, double>> kld_by_terrain;
  std::map<std::string, long> farms_by_terrain;

  CorrelationMatrix temporal_real;
  std::map<std::string, CorrelationMatrix> temporal_by_model;
  CorrelationMatrix spatial_real;
  std::map<std::string, CorrelationMatrix> spatial_by_model;

  StressResult stress_real;
  std::map<std::string, StressResult> stress_by_model;

  // terrain name -> source name ("real" or model) -> moments
  std::map<std::string, std::map<std::string, Moments>> moments_by_terrain;
  // source name -> pooled PDF over all farms
  std::map<std::string, Pdf> pdf_global;
  // terrain name -> source name -> PDF
  std::map<std::string, std::map<std::string, Pdf>> pdf_by_terrain;

  std::vector<std::string> notes;
};

/// Runs KDE/KLD (global and per terrain), correlation matrices, stress
/// integrals and moments for every generated set against the held-out real
/// data. Generated sets must share the real set's farm list and horizon.
inline EvalReport evaluate_models(
    const ScenarioDataset& real_test,
    const std::vector<std::pair<std::string, ScenarioDataset>>& generated,
    double bandwidth = 0.01) {
  real_test.validate();
  for (const auto& [name, ds] : generated) {
    ds.validate();
    if (ds.parks() != real_test.parks() || ds.horizon != real_test.horizon)
      throw ConfigError("generated set '" + name + "' is " +
                        std::to_string(ds.parks()) + "x" +
                        std::to_string(ds.horizon) + ", real data is " +
                        std::to_string(real_test.parks()) + "x" +
                        std::to_string(real_test.horizon));
    for (int p = 0; p < ds.parks(); ++p)
      if (ds.farms[static_cast<std::size_t>(p)].farm_id !=
          real_test.farms[static_cast<std::size_t>(p)].farm_id)
        throw ConfigError("generated set '" + name + "' farm ordering differs "
                          "from real data at index " + std::to_string(p));
  }

  EvalReport rep;
  rep.bandwidth = bandwidth;
  for (const auto& [name, ds] : generated) rep.model_names.push_back(name);

  auto checked_kld = [](const Pdf& a, const Pdf& b, const std::string& what) {
    const double v = symmetric_kld(a, b);
    if (v < -1e-9)
      throw NumericError("symmetric KLD for " + what +
                         " fell below the integration-error floor: " +
                         std::to_string(v));
    return v;
  };

  rep.pdf_global["real"] = kde_fit(real_test.pooled_values(), bandwidth);
  for (const auto& [name, ds] : generated) {
    rep.pdf_global[name] = kde_fit(ds.pooled_values(), bandwidth);
    rep.kld_global[name] =
        checked_kld(rep.pdf_global[name], rep.pdf_global.at("real"), name);
  }

  for (Terrain terrain : {Terrain::kFlatland, Terrain::kForest,
                          Terrain::kOffshore, Terrain::kSolar}) {
    const auto parks = real_test.parks_of_terrain(terrain);
    const std::string tname = terrain_name(terrain);
    if (parks.empty()) {
      rep.notes.push_back("terrain " + tname + ": no farms, omitted");
      continue;
    }
    rep.farms_by_terrain[tname] = static_cast<long>(parks.size());
    const auto real_vals = real_test.pooled_values(parks);
    rep.pdf_by_terrain[tname]["real"] = kde_fit(real_vals, bandwidth);
    rep.moments_by_terrain[tname]["real"] = moments(real_vals);
    for (const auto& [name, ds] : generated) {
      const auto gen_vals = ds.pooled_values(parks);
      rep.pdf_by_terrain[tname][name] = kde_fit(gen_vals, bandwidth);
      rep.kld_by_terrain[tname][name] =
          checked_kld(rep.pdf_by_terrain[tname][name],
                      rep.pdf_by_terrain[tname]["real"], tname + "/" + name);
      rep.moments_by_terrain[tname][name] = moments(gen_vals);
    }
  }

  rep.temporal_real = temporal_correlation(real_test);
  rep.spatial_real = spatial_correlation(real_test);
  rep.stress_real = stress_integral(real_test);
  for (const auto& [name, ds] : generated) {
    rep.temporal_by_model[name] = temporal_correlation(ds);
    rep.spatial_by_model[name] = spatial_correlation(ds);
    rep.stress_by_model[name] = stress_integral(ds);
  }
  return rep;
}

namespace detail {

inline void write_matrix_csv(const std::string& path,
                             const CorrelationMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j < m.n; ++j)
      out << format_double(m.at(i, j)) << (j + 1 < m.n ? "," : "");
    out << '\n';
  }
}

inline void write_stress_csv(const std::string& path, const StressResult& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "bin_left,bin_right,count\n";
  for (int b = 0; b < StressResult::kBins; ++b)
    out << format_double(b * s.bin_width()) << ','
        << format_double((b + 1) * s.bin_width()) << ','
        << s.histogram[static_cast<std::size_t>(b)] << '\n';
}

inline std::string sanitize_name(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
  return out;
}

}  // namespace detail

/// Writes the report files: KLD tables, per-source correlation matrices,
/// stress histograms, terrain PDFs, moments and a plain-text summary.
inline void write_report(const EvalReport& rep, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    // one column per model, mirroring the reference table layout
    std::ofstream out(out_dir + "/kld_global.csv");
    if (!out) throw IoError("cannot write " + out_dir + "/kld_global.csv");
    bool first = true;
    for (const auto& [name, v] : rep.kld_global) {
      out << (first ? "" : ",") << "kld_" << name;
      first = false;
    }
    out << '\n';
    first = true;
    for (const auto& [name, v] : rep.kld_global) {
      out << (first ? "" : ",") << detail::format_double(v);
      first = false;
    }
    out << '\n';
  }
  {
    std::ofstream out(out_dir + "/kld_terrain.csv");
    if (!out) throw IoError("cannot write " + out_dir + "/kld_terrain.csv");
    out << "terrain";
    for (const auto& [name, v] : rep.kld_global) out << ",kld_" << name;
    out << ",farms\n";
    for (const auto& [terrain, row] : rep.kld_by_terrain) {
      out << terrain;
      for (const auto& [name, v] : rep.kld_global) {
        auto it = row.find(name);
        out << ',' << (it == row.end() ? "" : detail::format_double(it->second));
      }
      long farms = 0;
      auto fit = rep.farms_by_terrain.find(terrain);
      if (fit != rep.farms_by_terrain.end()) farms = fit->second;
      out << ',' << farms << '\n';
    }
  }

  detail::write_matrix_csv(out_dir + "/temporal_corr_real.csv",
                           rep.temporal_real);
  detail::write_matrix_csv(out_dir + "/spatial_corr_real.csv",
                           rep.spatial_real);
  for (const auto& [name, m] : rep.temporal_by_model)
    detail::write_matrix_csv(
        out_dir + "/temporal_corr_" + detail::sanitize_name(name) + ".csv", m);
  for (const auto& [name, m] : rep.spatial_by_model)
    detail::write_matrix_csv(
        out_dir + "/spatial_corr_" + detail::sanitize_name(name) + ".csv", m);

  detail::write_stress_csv(out_dir + "/stress_hist_real.csv", rep.stress_real);
  for (const auto& [name, s] : rep.stress_by_model)
    detail::write_stress_csv(
        out_dir + "/stress_hist_" + detail::sanitize_name(name) + ".csv", s);

  for (const auto& [terrain, pdfs] : rep.pdf_by_terrain) {
    std::ofstream out(out_dir + "/terrain_pdfs_" + terrain + ".csv");
    if (!out) throw IoError("cannot write terrain pdf csv");
    out << "x";
    for (const auto& [name, pdf] : pdfs) out << ',' << name;
    out << '\n';
    for (int i = 0; i < Pdf::kGridSize; ++i) {
      out << detail::format_double(Pdf::grid_point(i));
      for (const auto& [name, pdf] : pdfs)
        out << ',' << detail::format_double(
                          pdf.densities[static_cast<std::size_t>(i)]);
      out << '\n';
    }
  }

  {
    std::ofstream out(out_dir + "/moments.csv");
    if (!out) throw IoError("cannot write " + out_dir + "/moments.csv");
    out << "terrain,source,mean,variance,skewness,zero_variance\n";
    for (const auto& [terrain, row] : rep.moments_by_terrain)
      for (const auto& [source, m] : row)
        out << terrain << ',' << source << ',' << detail::format_double(m.mean)
            << ',' << detail::format_double(m.variance) << ','
            << detail::format_double(m.skewness) << ','
            << (m.zero_variance ? 1 : 0) << '\n';
  }

  std::ofstream out(out_dir + "/report.txt");
  if (!out) throw IoError("cannot write " + out_dir + "/report.txt");
  out << "scenario evaluation report\n";
  out << "==========================\n\n";
  out << "KDE bandwidth: " << rep.bandwidth << "\n\n";
  out << "symmetric KLD, all farms pooled (lower is closer to real data):\n";
  for (const auto& [name, v] : rep.kld_global) {
    char line[128];
    std::snprintf(line, sizeof(line), "  %-16s %.4f\n", name.c_str(), v);
    out << line;
  }
  out << "\nsymmetric KLD per terrain:\n";
  for (const auto& [terrain, row] : rep.kld_by_terrain) {
    out << "  " << terrain << ":\n";
    for (const auto& [name, v] : row) {
      char line[128];
      std::snprintf(line, sizeof(line), "    %-16s %.4f\n", name.c_str(), v);
      out << line;
    }
  }
  out << "\nmoments per terrain (mean / variance / skewness):\n";
  for (const auto& [terrain, row] : rep.moments_by_terrain) {
    out << "  " << terrain << ":\n";
    for (const auto& [source, m] : row) {
      char line[160];
      std::snprintf(line, sizeof(line), "    %-16s %.4f / %.4f / %.4f%s\n",
                    source.c_str(), m.mean, m.variance, m.skewness,
                    m.zero_variance ? " (zero variance)" : "");
      out << line;
    }
  }
  for (const auto& note : rep.notes) out << "\nnote: " << note << '\n';
  out << "\nfootnote: published full-scale reference KLDs for context "
         "(GermanWindFarm2017, 50000-epoch training on the original data):\n"
         "  all farms   GC 0.062 / DC-GAN 0.218 / DC-WGAN 0.027\n"
         "  flatland    GC 0.143 / DC-GAN 0.194 / DC-WGAN 0.037\n"
         "  forest      GC 0.085 / DC-GAN 0.266 / DC-WGAN 0.018\n"
         "  offshore    GC 0.148 / DC-GAN 0.304 / DC-WGAN 0.046\n"
         "Desk-scale runs are not expected to reproduce these numbers.\n";
}

}  // namespace scengen
