#include "xsib/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "xsib/core/errors.hpp"
#include "xsib/core/foot.hpp"
#include "xsib/eval/metrics.hpp"

namespace xsib::eval {

double metric_interaction(const MotionWindow& world, const EvalDiscriminator& disc, int horizon) {
  const int F = disc.config().horizon + 1;
  std::vector<MotionWindow> windows;
  for (int s = 0; s + F <= std::min(horizon, world.frames()); s += disc.config().window_stride)
    windows.push_back(world.slice(s, F));
  if (windows.empty() || horizon > world.frames()) {
    throw RangeError("interaction: horizon " + std::to_string(horizon) + " holds no " + std::to_string(F) +
                     "-frame window of the " + std::to_string(world.frames()) + "-frame sequence");
  }
  const auto scores = disc.score(windows);
  double m = 0.0;
  for (double s : scores) m += s;
  return m / scores.size();
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  auto table = [](const std::map<int, double>& m) {
    nlohmann::json o = nlohmann::json::object();
    for (auto [h, v] : m) o[std::to_string(h)] = v;
    return o;
  };
  j = {{"l2p", table(r.l2p)},
       {"l2q", table(r.l2q)},
       {"foot_slide", table(r.foot_slide)},
       {"interaction", table(r.interaction)},
       {"diversity", table(r.diversity)},
       {"fid", table(r.fid)},
       {"npss100", table(r.npss100)},
       {"notes", r.notes}};
}

namespace {

std::vector<std::pair<std::string, const std::map<int, double>*>> columns(const MetricReport& r) {
  return {{"L2P", &r.l2p},       {"L2Q", &r.l2q},   {"Foot", &r.foot_slide}, {"Interaction", &r.interaction},
          {"Diversity", &r.diversity}, {"FID", &r.fid}, {"100xNPSS", &r.npss100}};
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <class Fn>
void parallel_for(int n, int workers, Fn fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

int shortest(const std::vector<MotionWindow>& seqs) {
  int m = std::numeric_limits<int>::max();
  for (const auto& s : seqs) m = std::min(m, s.frames());
  return m;
}

}  // namespace

std::string report_text(const MetricReport& r, const std::string& label) {
  std::ostringstream head, row;
  const int width = std::max<int>(10, static_cast<int>(label.size()));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-*s", width, "Method");
  head << buf;
  std::snprintf(buf, sizeof buf, "%-*s", width, label.c_str());
  row << buf;
  for (const auto& [name, values] : columns(r)) {
    for (auto [h, v] : *values) {
      const std::string title = name + "@" + std::to_string(h);
      std::snprintf(buf, sizeof buf, " %16s", title.c_str());
      head << buf;
      std::snprintf(buf, sizeof buf, " %16.6f", v);
      row << buf;
    }
  }
  std::string out = head.str() + "\n" + row.str() + "\n";
  for (const auto& n : r.notes) out += "# " + n + "\n";
  return out;
}

std::vector<nlohmann::json> report_records(const MetricReport& r, const std::string& label) {
  static const char* keys[] = {"l2p", "l2q", "foot_slide", "interaction", "diversity", "fid", "npss100"};
  std::vector<nlohmann::json> out;
  const auto cols = columns(r);
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (auto [h, v] : *cols[c].second) out.push_back({{"label", label}, {"metric", keys[c]}, {"horizon", h}, {"value", v}});
  return out;
}

MetricReport evaluate(const EvalInputs& in, const EvalAssets& assets, const EvalHorizons& hz, int workers) {
  if (in.pred.size() != in.gt.size() || in.pred.empty()) throw ShapeError("evaluate needs aligned pred/gt sequences");
  if (!assets.features || !assets.discriminator) throw ConfigError("missing evaluation assets");
  const int n = static_cast<int>(in.pred.size());
  const int shortest_pred = shortest(in.pred), shortest_pair = std::min(shortest_pred, shortest(in.gt));
  MetricReport r;
  auto usable = [&](const std::vector<int>& hs, int limit, const char* name) {
    std::vector<int> ok;
    for (int h : hs) {
      if (h <= limit) {
        ok.push_back(h);
      } else {
        r.notes.push_back(std::string(name) + "@" + std::to_string(h) + " skipped: sequences hold " +
                          std::to_string(limit) + " frames");
      }
    }
    return ok;
  };

  // Per-sequence values, summed in index order.
  auto mean_over = [&](const std::function<double(int)>& f) {
    std::vector<double> v(n);
    parallel_for(n, workers, [&](int i) { v[i] = f(i); });
    double s = 0.0;
    for (double x : v) s += x;
    return s / n;
  };

  for (int h : usable(hz.l2, shortest_pair, "L2")) {
    r.l2p[h] = mean_over([&](int i) { return metric_l2p(in.pred[i], in.gt[i], h); });
    r.l2q[h] = mean_over([&](int i) { return metric_l2q(in.pred[i], in.gt[i], h); });
  }
  for (int h : usable(hz.foot, shortest_pred, "Foot"))
    r.foot_slide[h] = mean_over([&](int i) { return foot_slide(in.pred[i], assets.skeleton, h); });
  for (int h : usable(hz.interaction, shortest_pred, "Interaction"))
    r.interaction[h] = mean_over([&](int i) { return metric_interaction(in.pred[i], *assets.discriminator, h); });

  if (!in.samples.empty()) {
    int limit = std::numeric_limits<int>::max();
    for (const auto& g : in.samples) limit = std::min(limit, shortest(g));
    for (int h : usable(hz.diversity, limit, "Diversity")) {
      std::vector<double> v(in.samples.size());
      parallel_for(static_cast<int>(v.size()), workers, [&](int i) { v[i] = metric_diversity(in.samples[i], h); });
      double s = 0.0;
      for (double x : v) s += x;
      r.diversity[h] = s / v.size();
    }
  } else {
    r.notes.push_back("Diversity skipped: no stochastic samples");
  }

  for (int h : usable(hz.npss, shortest_pair, "NPSS")) {
    std::vector<NpssResult> v(n);
    parallel_for(n, workers, [&](int i) { v[i] = metric_npss(in.pred[i], in.gt[i], assets.skeleton, h); });
    double s = 0.0;
    int skipped = 0;
    for (const auto& x : v) {
      s += x.value;
      skipped += x.skipped_channels;
    }
    r.npss100[h] = 100.0 * s / n;
    if (skipped > 0) r.notes.push_back("NPSS@" + std::to_string(h) + ": " + std::to_string(skipped) + " silent channels skipped");
  }
  for (int h : usable(hz.fid, shortest_pair, "FID")) {
    std::vector<Eigen::MatrixXd> fp(n), fg(n);
    parallel_for(n, workers, [&](int i) {
      fp[i] = assets.features->features({in.pred[i]}, h);
      fg[i] = assets.features->features({in.gt[i]}, h);
    });
    auto stack = [](const std::vector<Eigen::MatrixXd>& parts) {
      Eigen::Index rows = 0;
      for (const auto& p : parts) rows += p.rows();
      Eigen::MatrixXd m(rows, parts.front().cols());
      Eigen::Index at = 0;
      for (const auto& p : parts) {
        m.middleRows(at, p.rows()) = p;
        at += p.rows();
      }
      return m;
    };
    const auto fid = metric_fid(stack(fp), stack(fg));
    r.fid[h] = fid.value;
    if (fid.ridge_applied) r.notes.push_back("FID@" + std::to_string(h) + ": singular covariance, ridge 1e-6 added");
  }
  return r;
}

}  // namespace xsib::eval
