#pragma once

// Prediction from stored fit artifacts: covariate profiles are pushed through
// either the stored posterior draws (default) or the plug-in posterior means.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lgm/artifacts.hpp"
#include "lgm/csv.hpp"
#include "lgm/domain.hpp"
#include "lgm/likelihood.hpp"

namespace lgm {

struct Profile {
  std::string label;
  std::string region;  // empty: predict for every region
  Eigen::VectorXd x;   // aligned with covariate names, defaults 0
};

struct ProfileTable {
  std::vector<std::string> covariate_names;
  std::vector<Profile> profiles;
};

inline ProfileTable read_profiles(const std::string& path,
                                  const std::vector<std::string>& covariates) {
  RawTable t = read_csv(path);
  ProfileTable out;
  out.covariate_names = covariates;
  std::vector<int> cov_col(covariates.size(), -1);
  int label_col = -1, region_col = -1;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    const std::string& name = t.columns[c];
    if (name == "profile") {
      label_col = static_cast<int>(c);
      continue;
    }
    if (name == "region") {
      region_col = static_cast<int>(c);
      continue;
    }
    const auto it = std::find(covariates.begin(), covariates.end(), name);
    if (it == covariates.end())
      throw UnknownCovariate("profile column '" + name + "' is not a model covariate");
    cov_col[it - covariates.begin()] = static_cast<int>(c);
  }
  for (std::size_t i = 0; i < t.rows; ++i) {
    Profile p;
    p.label = label_col >= 0 ? std::string(t.at(i, label_col)) : "p" + fmt_int(static_cast<std::int64_t>(i));
    if (region_col >= 0) p.region = std::string(t.at(i, region_col));
    p.x = Eigen::VectorXd::Zero(covariates.size());
    for (std::size_t c = 0; c < covariates.size(); ++c)
      if (cov_col[c] >= 0) p.x[c] = parse_double(t.at(i, cov_col[c]), path);
    out.profiles.push_back(std::move(p));
  }
  return out;
}

struct PredictionRow {
  std::string profile;
  std::string region;
  double mean = 0.0, q025 = 0.0, q975 = 0.0;
};

namespace detail {

struct FitColumns {
  int intercept = -1;
  std::vector<int> beta;             // per covariate
  std::vector<std::string> regions;  // original identifiers
  std::vector<int> gamma;            // aligned with regions
};

inline FitColumns locate_columns(const std::vector<std::string>& names,
                                 const std::vector<std::string>& covariates) {
  FitColumns fc;
  fc.beta.assign(covariates.size(), -1);
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string& n = names[c];
    if (n == "Intercept") {
      fc.intercept = static_cast<int>(c);
      continue;
    }
    if (n.rfind("gamma_", 0) == 0) {
      fc.regions.push_back(n.substr(6));
      fc.gamma.push_back(static_cast<int>(c));
      continue;
    }
    const auto it = std::find(covariates.begin(), covariates.end(), n);
    if (it != covariates.end()) fc.beta[it - covariates.begin()] = static_cast<int>(c);
  }
  if (fc.intercept < 0) throw MissingFitArtifact("stored fit lacks an Intercept column");
  for (std::size_t c = 0; c < covariates.size(); ++c)
    if (fc.beta[c] < 0)
      throw MissingFitArtifact("stored fit lacks coefficient " + covariates[c]);
  return fc;
}

inline double summarize_into(PredictionRow& row, std::vector<double>& vals) {
  double mu = 0.0;
  for (double v : vals) mu += v;
  mu /= double(vals.size());
  std::sort(vals.begin(), vals.end());
  const std::size_t S = vals.size();
  auto quant = [&](double q) {
    const double pos = q * double(S - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, S - 1);
    const double frac = pos - double(lo);
    return vals[lo] * (1.0 - frac) + vals[hi] * frac;
  };
  row.mean = mu;
  row.q025 = quant(0.025);
  row.q975 = quant(0.975);
  return mu;
}

}  // namespace detail

// Mixture prediction: push every stored posterior draw through the response
// transform, then summarize. `max_draws` restricts to the first draws.
inline std::vector<PredictionRow> predict_from_draws(
    Family family, const std::vector<std::string>& covariates, double time_scale,
    const StoredDraws& draws, const ProfileTable& profiles, int max_draws = 0) {
  const detail::FitColumns fc = detail::locate_columns(draws.latent_names, covariates);
  int S = static_cast<int>(draws.latent.rows());
  if (max_draws > 0) S = std::min(S, max_draws);
  if (S < 1) throw InsufficientDraws("stored fit has no draws");
  if (family == Family::weibull && draws.alpha.size() < static_cast<Eigen::Index>(S))
    throw MissingFitArtifact("stored draws lack the shape column");

  std::vector<PredictionRow> out;
  std::vector<double> vals(S);
  for (const auto& prof : profiles.profiles) {
    std::vector<int> targets;
    if (!prof.region.empty()) {
      const auto it = std::find(fc.regions.begin(), fc.regions.end(), prof.region);
      if (it == fc.regions.end() && !fc.regions.empty())
        throw UnknownRegion("profile region '" + prof.region + "' not in the fit");
      targets.push_back(it == fc.regions.end() ? -1 : static_cast<int>(it - fc.regions.begin()));
    } else if (fc.regions.empty()) {
      targets.push_back(-1);
    } else {
      for (std::size_t r = 0; r < fc.regions.size(); ++r) targets.push_back(static_cast<int>(r));
    }
    for (int r : targets) {
      PredictionRow row;
      row.profile = prof.label;
      row.region = r < 0 ? "all" : fc.regions[r];
      for (int s = 0; s < S; ++s) {
        double eta = draws.latent(s, fc.intercept);
        for (std::size_t c = 0; c < covariates.size(); ++c)
          eta += prof.x[c] * draws.latent(s, fc.beta[c]);
        if (r >= 0) eta += draws.latent(s, fc.gamma[r]);
        if (family == Family::logit) {
          vals[s] = logistic(eta);
        } else {
          const double a = draws.alpha[s];
          vals[s] = std::pow(std::log(2.0) * std::exp(-eta), 1.0 / a) * time_scale;
        }
      }
      detail::summarize_into(row, vals);
      out.push_back(std::move(row));
    }
  }
  return out;
}

// Plug-in prediction at posterior means; intervals collapse to the point.
inline std::vector<PredictionRow> predict_plugin(
    Family family, const std::vector<std::string>& covariates, double time_scale,
    const std::vector<SummaryRow>& summaries, const ProfileTable& profiles) {
  std::map<std::string, double> mean;
  for (const auto& r : summaries) mean[r.name] = r.mean;
  if (!mean.count("Intercept"))
    throw MissingFitArtifact("stored summaries lack an Intercept row");
  for (const auto& c : covariates)
    if (!mean.count(c)) throw MissingFitArtifact("stored summaries lack coefficient " + c);
  std::vector<std::string> regions;
  for (const auto& r : summaries)
    if (r.name.rfind("gamma_", 0) == 0) regions.push_back(r.name.substr(6));

  std::vector<PredictionRow> out;
  for (const auto& prof : profiles.profiles) {
    std::vector<std::string> targets;
    if (!prof.region.empty()) {
      if (!regions.empty() &&
          std::find(regions.begin(), regions.end(), prof.region) == regions.end())
        throw UnknownRegion("profile region '" + prof.region + "' not in the fit");
      targets.push_back(regions.empty() ? std::string("all") : prof.region);
    } else if (regions.empty()) {
      targets.push_back("all");
    } else {
      targets = regions;
    }
    for (const auto& region : targets) {
      double eta = mean["Intercept"];
      for (std::size_t c = 0; c < covariates.size(); ++c) eta += prof.x[c] * mean[covariates[c]];
      if (region != "all") eta += mean["gamma_" + region];
      double value;
      if (family == Family::logit) {
        value = logistic(eta);
      } else {
        const double a = mean.count("alpha") ? mean["alpha"] : 1.0;
        value = std::pow(std::log(2.0) * std::exp(-eta), 1.0 / a) * time_scale;
      }
      out.push_back({prof.label, region, value, value, value});
    }
  }
  return out;
}

inline void write_predictions(const std::vector<PredictionRow>& rows, Family family,
                              const std::string& path) {
  CsvWriter w({"profile", "region", "quantity", "mean", "q2.5", "q97.5"});
  const std::string quantity =
      family == Family::logit ? "probability" : "median_survival";
  for (const auto& r : rows) {
    w.cell(r.profile);
    w.cell(r.region);
    w.cell(quantity);
    w.cell(r.mean);
    w.cell(r.q025);
    w.cell(r.q975);
    w.end_row();
  }
  w.save(path);
}

}  // namespace lgm
