#include "cec/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cec/rng.hpp"

namespace cec {

using nlohmann::ordered_json;

void SyntheticConfig::validate() const {
    if (n < 4) throw ConfigError("synthetic: n must be >= 4 (one instance per (y,a) cell)");
    if (d_financial < 1) throw ConfigError("synthetic: need at least one financial feature");
    if (d_proxy < 0 || d_noise < 0) throw ConfigError("synthetic: negative feature counts");
    if (noise_std < 0.0) throw ConfigError("synthetic: noise_std must be >= 0");
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ConfigError("synthetic: test_fraction must be in [0, 1)");
    if (label_weights && static_cast<int>(label_weights->size()) != d_financial)
        throw ConfigError("synthetic: label_weights size must equal d_financial");
}

SyntheticConfig SyntheticConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SyntheticConfig c;
    c.n = j.value("n", c.n);
    c.d_financial = j.value("d_financial", c.d_financial);
    c.d_proxy = j.value("d_proxy", c.d_proxy);
    c.d_noise = j.value("d_noise", c.d_noise);
    c.proxy_shift = j.value("proxy_shift", c.proxy_shift);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.seed = j.value("seed", c.seed);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("label_weights")) c.label_weights = j.at("label_weights").get<Vec64>();
    if (j.contains("label_threshold")) c.label_threshold = j.at("label_threshold").get<double>();
    c.validate();
    return c;
}

SyntheticConfig SyntheticConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read synthetic config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string SyntheticConfig::to_json() const {
    ordered_json j;
    j["n"] = n;
    j["d_financial"] = d_financial;
    j["d_proxy"] = d_proxy;
    j["d_noise"] = d_noise;
    j["proxy_shift"] = proxy_shift;
    j["noise_std"] = noise_std;
    j["seed"] = seed;
    j["test_fraction"] = test_fraction;
    if (label_weights) j["label_weights"] = *label_weights;
    if (label_threshold) j["label_threshold"] = *label_threshold;
    return j.dump(2);
}

Dataset generate_synthetic(const SyntheticConfig& cfg, Vec64* eps_out) {
    cfg.validate();
    const int n = cfg.n, df = cfg.d_financial, dp = cfg.d_proxy, dn = cfg.d_noise;
    const int d = cfg.dim();

    Rng rng_a(derive_seed(cfg.seed, "synth-a"));
    Rng rng_fin(derive_seed(cfg.seed, "synth-fin"));
    Rng rng_proxy(derive_seed(cfg.seed, "synth-proxy"));
    Rng rng_noise(derive_seed(cfg.seed, "synth-noise"));
    Rng rng_w(derive_seed(cfg.seed, "synth-w"));
    Rng rng_eps(derive_seed(cfg.seed, "synth-eps"));

    Dataset ds;
    ds.a.resize(n);
    for (int i = 0; i < n; ++i) ds.a[i] = rng_a.bernoulli(0.5) ? 1 : 0;

    ds.X = Matrix(n, d);
    for (int i = 0; i < n; ++i) {
        double* row = ds.X.row_ptr(i);
        for (int j = 0; j < df; ++j) row[j] = rng_fin.normal();
        const double shift = (ds.a[i] - 0.5) * cfg.proxy_shift;
        for (int j = 0; j < dp; ++j) row[df + j] = rng_proxy.normal() + shift;
        for (int j = 0; j < dn; ++j) row[df + dp + j] = rng_noise.normal();
    }

    Vec64 w;
    if (cfg.label_weights) {
        w = *cfg.label_weights;
    } else {
        w.resize(df);
        for (auto& v : w) v = rng_w.normal();
    }

    Vec64 score(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* row = ds.X.row_ptr(i);
        double s = 0.0;
        for (int j = 0; j < df; ++j) s += w[j] * row[j];
        score[i] = s;
    }

    double tau;
    if (cfg.label_threshold) {
        tau = *cfg.label_threshold;
    } else {
        Vec64 sorted = score;
        std::sort(sorted.begin(), sorted.end());
        tau = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }

    Vec64 eps(n);
    ds.y.resize(n);
    for (int i = 0; i < n; ++i) {
        eps[i] = cfg.noise_std * rng_eps.normal();
        ds.y[i] = score[i] + eps[i] > tau ? 1 : 0;
    }
    if (eps_out) *eps_out = eps;

    for (int j = 0; j < df; ++j) {
        ds.schema.feature_names.push_back("fin_" + std::to_string(j));
        ds.schema.financial_idx.push_back(j);
    }
    for (int j = 0; j < dp; ++j) {
        ds.schema.feature_names.push_back("proxy_" + std::to_string(j));
        ds.schema.excluded_proxies.push_back(df + j);
    }
    for (int j = 0; j < dn; ++j) ds.schema.feature_names.push_back("noise_" + std::to_string(j));

    SyntheticProvenance prov;
    prov.seed = cfg.seed;
    prov.label_weights = w;
    prov.label_threshold = tau;
    prov.proxy_shift = cfg.proxy_shift;
    prov.noise_std = cfg.noise_std;
    prov.d_financial = df;
    prov.d_proxy = dp;
    prov.d_noise = dn;
    ds.synthetic = std::move(prov);

    ds.validate();
    return ds;
}

}  // namespace cec
