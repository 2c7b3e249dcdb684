#include "mojet/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "mojet/datasets.hpp"
#include "mojet/errors.hpp"
#include "mojet/linalg.hpp"
#include "mojet/mojet.hpp"
#include "mojet/training.hpp"

namespace mojet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs f, prefixing any error message with the stage name. The exception
// type is preserved so the CLI can still map it to an exit code.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    const std::string p = name + ": ";
    try {
        return f();
    } catch (const DataError& e) {
        throw DataError(p + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(p + e.what());
    } catch (const NotLinearError& e) {
        throw NotLinearError(p + e.what());
    } catch (const UnidentifiableError& e) {
        throw UnidentifiableError(p + e.what());
    } catch (const RankDeficiencyError& e) {
        throw RankDeficiencyError(p + e.what());
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(p + e.what());
    } catch (const NumericError& e) {
        throw NumericError(p + e.what());
    } catch (const Error& e) {
        throw Error(p + e.what());
    }
}

TrainConfig train_config(const TrainOverrides& o, TrainConfig defaults, std::uint64_t seed) {
    if (o.epochs) defaults.epochs = *o.epochs;
    if (o.step_size) defaults.step_size = *o.step_size;
    if (o.batch_size) defaults.batch_size = *o.batch_size;
    if (o.l2) defaults.l2 = *o.l2;
    defaults.seed = seed;
    return defaults;
}

Json train_echo(const TrainConfig& t) {
    return Json{{"epochs", t.epochs}, {"step_size", t.step_size}, {"batch_size", t.batch_size}, {"l2", t.l2}};
}

Json train_summary(const TrainResult& r) {
    return Json{{"final_loss", r.final_loss},
                {"grad_inf_norm", r.grad_inf_norm},
                {"converged", r.converged},
                {"epochs_run", r.log.empty() ? 0 : r.log.back().epoch}};
}

// Per-experiment resolved knobs shared by every MoJet run.
struct Common {
    std::uint64_t seed = 0;
    std::size_t S = 0;
    std::size_t J = 0;
    double sigma = 0.0;
    bool per_base = false;
    RidgePolicy ridge;
    double rank_tol = tolerances::kRank;
    MirageThresholds thresholds;
    bool parallel = false;
};

Common resolve_common(const ExperimentConfig& c, std::size_t S, std::size_t J, double sigma,
                      bool per_base, RidgePolicy ridge) {
    Common r;
    r.seed = c.seed;
    r.S = c.S.value_or(S);
    r.J = c.J.value_or(J);
    r.sigma = c.probe_sigma.value_or(sigma);
    r.per_base = c.per_base_probes.value_or(per_base);
    r.ridge = c.ridge.value_or(ridge);
    r.rank_tol = c.rank_tol;
    r.thresholds = c.thresholds;
    r.parallel = c.parallel;
    if (r.S == 0) throw ValidationError("config: S must be positive");
    if (r.J == 0) throw ValidationError("config: J must be positive");
    if (!(r.sigma > 0.0)) throw ValidationError("config: probes.sigma must be positive");
    return r;
}

Json common_echo(const Common& r) {
    return Json{{"S", r.S},
                {"J", r.J},
                {"probes", Json{{"sigma", r.sigma}, {"per_base", r.per_base}}},
                {"ridge", ridge_to_json(r.ridge)},
                {"tolerances", Json{{"rank", r.rank_tol}}},
                {"thresholds", Json{{"hi", r.thresholds.hi}, {"lo", r.thresholds.lo}}},
                {"parallel", r.parallel}};
}

struct Model {
    std::string name;
    Pipeline pipeline;
    std::string tap;
};

struct FamilyRun {
    DiagnosticsRun run;
    MojetResult result;
};

FamilyRun run_family(std::vector<Model>& models, const std::vector<Vector>& bases,
                     const ProbeDesign& design, const Common& r, const std::string& label,
                     const RngStream& probe_rng) {
    return stage("mojet[" + label + "]", [&] {
        std::vector<TappedModel> tapped;
        std::uint64_t before = 0;
        for (auto& m : models) {
            before += m.pipeline.read_counter();
            tapped.push_back(TappedModel{m.name, &m.pipeline, {m.tap}});
        }
        MojetOptions opt;
        opt.design = design;
        opt.ridge = r.ridge;
        opt.sweep.per_base_probes = r.per_base;
        opt.sweep.parallel = r.parallel;
        opt.rank_tol = r.rank_tol;
        opt.thresholds = r.thresholds;
        FamilyRun out;
        out.result = run_mojet(tapped, bases, opt, probe_rng);
        std::uint64_t after = 0;
        for (const auto& m : models) after += m.pipeline.read_counter();
        out.run.label = label;
        out.run.report = out.result.report;
        out.run.probes = design.count;
        out.run.models = models.size();
        out.run.counted_passes = after - before;
        return out;
    });
}

const SummaryStats& rank_stats(const DiagnosticsReport& r, std::size_t channel) {
    return r.channel_summaries.at(channel).rank_stats;
}

const SummaryStats& sim_stats(const DiagnosticsReport& r, std::size_t pair = 0) {
    return r.pair_summaries.at(pair).score_stats;
}

std::vector<double> channel_ranks(const DiagnosticsReport& r, std::size_t channel) {
    std::vector<double> v;
    for (const auto& b : r.bases) v.push_back(static_cast<double>(b.ranks[channel].rank));
    return v;
}

Json run_json(const DiagnosticsRun& run) {
    return Json{{"label", run.label},
                {"J", run.probes},
                {"models", run.models},
                {"diagnostics", diagnostics_to_json(run.report, false)}};
}

void add_plot_rows(ExperimentOutput& out, const DiagnosticsRun& run) {
    const auto& r = run.report;
    for (const auto& b : r.bases) {
        for (std::size_t c = 0; c < r.channels.size(); ++c) {
            out.plot.push_back({run.label, "rank:" + r.channels[c], std::to_string(b.base_id),
                                static_cast<double>(b.ranks[c].rank)});
        }
        for (std::size_t p = 0; p < r.pairs.size(); ++p) {
            if (b.sims[p]) {
                out.plot.push_back({run.label, "jetsim:" + pair_label(r, p), std::to_string(b.base_id),
                                    b.sims[p]->score});
            }
        }
    }
}

void add_run(ExperimentOutput& out, DiagnosticsRun run) {
    add_plot_rows(out, run);
    out.runs.push_back(std::move(run));
}

Table cost_table(const std::vector<DiagnosticsRun>& runs) {
    Table t;
    t.header = {"run", "n_jet", "J", "M", "probe_passes", "expected_probe_passes", "base_passes",
                "counted_forward_passes", "wall_time_s"};
    for (const auto& run : runs) {
        const auto n = static_cast<std::uint64_t>(run.report.bases.size());
        t.rows.push_back({run.label, n, static_cast<std::uint64_t>(run.probes),
                          static_cast<std::uint64_t>(run.models), run.report.cost.probe_passes,
                          n * run.probes * run.models, run.report.cost.base_passes,
                          run.counted_passes, run.report.cost.wall_time_s});
    }
    return t;
}

Json header_json(const ExperimentConfig& c) {
    return Json{{"artifact", Json{{"name", kArtifactName}, {"version", kArtifactVersion}}},
                {"experiment", c.experiment},
                {"seed", c.seed}};
}

// ---------------------------------------------------------------- linreg

ExperimentOutput run_linreg(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    const std::size_t n_train = c.n_train.value_or(1000);
    const std::size_t n_test = c.n_test.value_or(200);
    const std::size_t d = c.d.value_or(10);
    const double noise = c.noise_sigma.value_or(0.1);
    const Common r = resolve_common(c, 20, 32, 1e-3, false, ZeroRidge{});

    const auto data = stage("generate data", [&] { return gen_linreg(c.seed, n_train, n_test, d, noise); });
    const Vector beta_hat = stage("fit OLS", [&] { return fit_ols(data.train); });
    std::vector<Model> models;
    models.push_back({"ols", Pipeline({Linear{Matrix::row_vector(beta_hat), std::nullopt}}, {Tap{"output", 0}}),
                      "output"});
    const double test_mse = mse(models[0].pipeline, data.test);
    const auto bases = stage("choose bases", [&] { return choose_bases(data.test.x, r.S, c.seed); });
    auto fam = run_family(models, bases, ProbeDesign::isotropic(r.sigma, r.J), r, "coarse",
                          RngStream(c.seed, StreamId::kProbes));

    Vector beta_jet(d, 0.0);
    double max_rel_err = 0.0;
    const double beta_norm = norm2(beta_hat);
    for (const auto& jet : fam.result.jets[0]) {
        Vector g = jet.jacobian.row(0).size() == d ? Vector(jet.jacobian.row(0).begin(), jet.jacobian.row(0).end())
                                                   : Vector(d, 0.0);
        max_rel_err = std::max(max_rel_err, norm2(g - beta_hat) / beta_norm);
        for (std::size_t j = 0; j < d; ++j) beta_jet[j] += g[j] / static_cast<double>(bases.size());
    }
    auto rmse = [](const Vector& a, const Vector& b) {
        return norm2(a - b) / std::sqrt(static_cast<double>(a.size()));
    };

    ExperimentOutput out;
    out.report = header_json(c);
    Json cfg = common_echo(r);
    cfg["n_train"] = n_train;
    cfg["n_test"] = n_test;
    cfg["d"] = d;
    cfg["data"] = Json{{"noise_sigma", noise}};
    out.report["config"] = cfg;
    out.report["artifact_choices"] = Json::array({"data.noise_sigma"});
    out.report["metrics"] = Json{{"test_mse", test_mse},
                                 {"noise_variance", noise * noise},
                                 {"mse_over_noise_variance", noise > 0.0 ? test_mse / (noise * noise) : 0.0},
                                 {"jet_vs_ols_max_rel_error", max_rel_err},
                                 {"rmse_jet_vs_ols", rmse(beta_jet, beta_hat)},
                                 {"rmse_jet_vs_true", rmse(beta_jet, data.beta_star)},
                                 {"rmse_ols_vs_true", rmse(beta_hat, data.beta_star)},
                                 {"beta_star", data.beta_star},
                                 {"beta_hat", beta_hat},
                                 {"beta_jet", beta_jet}};
    Table coef;
    coef.header = {"coordinate", "beta_star", "beta_hat", "beta_jet"};
    for (std::size_t j = 0; j < d; ++j) {
        coef.rows.push_back({static_cast<std::uint64_t>(j), data.beta_star[j], beta_hat[j], beta_jet[j]});
        out.plot.push_back({"coarse", "beta_star", std::to_string(j), data.beta_star[j]});
        out.plot.push_back({"coarse", "beta_jet", std::to_string(j), beta_jet[j]});
    }
    out.figures.emplace_back("coefficients", std::move(coef));
    add_run(out, std::move(fam.run));
    out.report["runs"] = Json::array();
    for (const auto& run : out.runs) out.report["runs"].push_back(run_json(run));
    out.report["wall_time_s"] = seconds_since(t0);
    return out;
}

// -------------------------------------------------------- deep_regressor

std::vector<LayerSpec> model_a_layers() {
    return {{16, ActivationFn::kTanh, true, ""},
            {3, std::nullopt, true, "bottleneck"},
            {16, ActivationFn::kTanh, true, ""},
            {1, std::nullopt, true, ""}};
}

// One concrete reading of "additional linear layers before and after the
// bottleneck": 8→8 linear, 8→3 ReLU bottleneck, 3→3 linear, then the head.
std::vector<LayerSpec> model_b_layers() {
    return {{8, std::nullopt, true, ""},
            {3, ActivationFn::kRelu, true, "bottleneck"},
            {3, std::nullopt, true, ""},
            {16, ActivationFn::kTanh, true, ""},
            {1, std::nullopt, true, ""}};
}

ExperimentOutput run_deep_regressor(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    LatentRegressionParams p;
    p.d = c.d.value_or(8);
    p.k = c.k.value_or(3);
    p.n_train = c.n_train.value_or(1000);
    p.n_test = c.n_test.value_or(200);
    p.x_noise = c.x_noise.value_or(p.x_noise);
    p.y_noise = c.y_noise.value_or(p.y_noise);
    const Common r = resolve_common(c, 50, 32, 1e-2, false, ScaleAwareRidge{});
    if (c.replicas == 0) throw ValidationError("config: replicas must be positive");
    TrainConfig defaults;
    defaults.epochs = 300;
    defaults.step_size = 0.05;
    defaults.batch_size = 32;

    ExperimentOutput out;
    out.report = header_json(c);
    Json per_seed = Json::array();
    std::vector<double> ranks_a_coarse, ranks_b_coarse, ranks_a_struct, ranks_b_struct;
    std::vector<double> sims_coarse, sims_struct, mse_a, mse_b;
    std::size_t structured_wins = 0;
    TrainConfig echo_cfg;

    for (std::size_t rep = 0; rep < c.replicas; ++rep) {
        const std::uint64_t seed = c.seed + rep;
        const std::string tag = "seed" + std::to_string(seed);
        const auto data = stage(tag + " generate data", [&] { return gen_latent_regression(seed, p); });
        const TrainConfig tc_a = train_config(c.mlp, defaults, seed);
        TrainConfig tc_b = tc_a;
        tc_b.seed = seed ^ 0x5bd1e995ULL;  // distinct init stream for model B
        echo_cfg = tc_a;
        TrainConfig ca = tc_a;
        ca.layers = model_a_layers();
        TrainConfig cb = tc_b;
        cb.layers = model_b_layers();
        auto ra = stage(tag + " train model A", [&] { return train_mlp(data.train, ca); });
        auto rb = stage(tag + " train model B", [&] { return train_mlp(data.train, cb); });
        const double ma = mse(ra.pipeline, data.test);
        const double mb = mse(rb.pipeline, data.test);
        mse_a.push_back(ma);
        mse_b.push_back(mb);

        const auto pca = stage(tag + " fit PCA", [&] { return fit_pca(data.train, p.k); });
        std::vector<Model> models;
        models.push_back({"A", std::move(ra.pipeline), "bottleneck"});
        models.push_back({"B", std::move(rb.pipeline), "bottleneck"});
        const auto bases = stage(tag + " choose bases", [&] { return choose_bases(data.test.x, r.S, seed); });
        const RngStream probe_rng(seed, StreamId::kProbes);
        auto coarse = run_family(models, bases, ProbeDesign::isotropic(r.sigma, r.J), r, tag + "/coarse",
                                 probe_rng.derive(0));
        auto structured = run_family(models, bases, ProbeDesign::aligned(pca.module.components, r.sigma, r.J),
                                     r, tag + "/structured", probe_rng.derive(1));

        const auto& rc = coarse.run.report;
        const auto& rs = structured.run.report;
        for (double v : channel_ranks(rc, 0)) ranks_a_coarse.push_back(v);
        for (double v : channel_ranks(rc, 1)) ranks_b_coarse.push_back(v);
        for (double v : channel_ranks(rs, 0)) ranks_a_struct.push_back(v);
        for (double v : channel_ranks(rs, 1)) ranks_b_struct.push_back(v);
        const double sc = sim_stats(rc).mean;
        const double ss = sim_stats(rs).mean;
        sims_coarse.push_back(sc);
        sims_struct.push_back(ss);
        const bool win = sim_stats(rs).count > 0 && sim_stats(rc).count > 0 && ss > sc;
        if (win) ++structured_wins;
        per_seed.push_back(Json{{"seed", seed},
                                {"test_mse_A", ma},
                                {"test_mse_B", mb},
                                {"train_A", train_summary(ra)},
                                {"train_B", train_summary(rb)},
                                {"median_rank_A_coarse", rank_stats(rc, 0).median},
                                {"median_rank_B_coarse", rank_stats(rc, 1).median},
                                {"median_rank_A_structured", rank_stats(rs, 0).median},
                                {"median_rank_B_structured", rank_stats(rs, 1).median},
                                {"mean_jetsim_coarse", sc},
                                {"mean_jetsim_structured", ss},
                                {"structured_exceeds_coarse", win}});
        add_run(out, std::move(coarse.run));
        add_run(out, std::move(structured.run));
    }

    Json cfg = common_echo(r);
    cfg["n_train"] = p.n_train;
    cfg["n_test"] = p.n_test;
    cfg["d"] = p.d;
    cfg["k"] = p.k;
    cfg["replicas"] = c.replicas;
    cfg["data"] = Json{{"x_noise", p.x_noise}, {"y_noise", p.y_noise}, {"a", p.a}, {"b", p.b},
                       {"quad_scale", p.quad_scale}};
    cfg["training"] = Json{{"mlp", train_echo(echo_cfg)}};
    cfg["models"] = Json{{"A", "8-16 tanh-3 (tap) -16 tanh-1"},
                         {"B", "8-8 linear-3 relu (tap) -3 linear-16 tanh-1"}};
    out.report["config"] = cfg;
    out.report["artifact_choices"] =
        Json::array({"data.x_noise", "data.y_noise", "data.a", "data.b", "data.quad_scale", "training.mlp",
                     "models.B (architecture interpretation)"});
    out.report["metrics"] = Json{
        {"replicas", c.replicas},
        {"test_mse_A", summary_to_json(summarize(mse_a))},
        {"test_mse_B", summary_to_json(summarize(mse_b))},
        {"rank_A_coarse", summary_to_json(summarize(ranks_a_coarse))},
        {"rank_B_coarse", summary_to_json(summarize(ranks_b_coarse))},
        {"rank_A_structured", summary_to_json(summarize(ranks_a_struct))},
        {"rank_B_structured", summary_to_json(summarize(ranks_b_struct))},
        {"jetsim_coarse", summary_to_json(summarize(sims_coarse))},
        {"jetsim_structured", summary_to_json(summarize(sims_struct))},
        {"seeds_structured_exceeds_coarse", structured_wins},
        {"per_seed", per_seed}};
    out.report["runs"] = Json::array();
    for (const auto& run : out.runs) out.report["runs"].push_back(run_json(run));
    out.report["wall_time_s"] = seconds_since(t0);
    return out;
}

// ----------------------------------------------- pipeline_classification

// Shared shape of the PCA-vs-other comparisons (synthetic mixture, digits).
struct ClassificationSetup {
    Dataset train;
    Dataset test;
    std::vector<Model> models;  // [0] = PCA pipeline
    PcaFit pca;
    std::vector<Vector> bases;
    Json train_info;
    Json train_echo;
    Json data_echo;
    std::string data_source;
};

ClassificationSetup build_mixture(const ExperimentConfig& c, const Common& r) {
    MixtureParams p;
    p.d = c.d.value_or(p.d);
    p.k = c.k.value_or(p.k);
    p.n_train = c.n_train.value_or(p.n_train);
    p.n_test = c.n_test.value_or(p.n_test);
    p.separation = c.separation.value_or(p.separation);
    p.latent_noise = c.latent_noise.value_or(p.latent_noise);
    p.x_noise = c.x_noise.value_or(p.x_noise);
    TrainConfig defaults;
    defaults.epochs = 2000;
    defaults.step_size = 0.5;
    defaults.batch_size = 0;
    const TrainConfig tc = train_config(c.logistic, defaults, c.seed);

    ClassificationSetup s;
    auto data = stage("generate data", [&] { return gen_mixture_classification(c.seed, p); });
    s.train = std::move(data.train);
    s.test = std::move(data.test);
    s.pca = stage("fit PCA", [&] { return fit_pca(s.train, p.k); });
    const Pipeline proj({s.pca.module});
    const Dataset scores = Dataset::classification(predict(proj, s.train.x), s.train.labels, s.train.classes);
    auto head = stage("fit logistic on PCA scores", [&] { return fit_logistic(scores, tc); });
    auto dense = stage("fit dense logistic", [&] { return fit_logistic(s.train, tc); });
    s.models.push_back({"pca", Pipeline({s.pca.module, head.pipeline.modules().front()}, {Tap{"scores", 0}}),
                        "scores"});
    s.models.push_back({"dense", Pipeline({Identity{p.d}, dense.pipeline.modules().front()}, {Tap{"input", 0}}),
                        "input"});
    s.train_info = Json{{"pca_logistic", train_summary(head)}, {"dense_logistic", train_summary(dense)}};
    s.train_echo = Json{{"logistic", train_echo(tc)}};
    s.data_echo = Json{{"n_train", p.n_train}, {"n_test", p.n_test}, {"d", p.d}, {"k", p.k},
                       {"classes", p.classes}, {"separation", p.separation},
                       {"latent_noise", p.latent_noise}, {"x_noise", p.x_noise}};
    s.data_source = "synthetic mixture";
    s.bases = stage("choose bases", [&] { return choose_bases(s.test.x, r.S, c.seed); });
    return s;
}

ClassificationSetup build_digits(const ExperimentConfig& c, const Common& r) {
    const std::size_t k = c.k.value_or(10);
    TrainConfig log_defaults;
    log_defaults.epochs = 3000;
    log_defaults.step_size = 1.0;
    log_defaults.batch_size = 0;
    TrainConfig mlp_defaults;
    mlp_defaults.epochs = 200;
    mlp_defaults.step_size = 0.05;
    mlp_defaults.batch_size = 32;
    mlp_defaults.l2 = 0.02;
    TrainConfig tm = train_config(c.mlp, mlp_defaults, c.seed);
    tm.layers = {{32, ActivationFn::kRelu, true, "hidden"}, {kDigitsClasses, std::nullopt, true, ""}};

    ClassificationSetup s;
    DigitsData data = stage("load digits", [&] {
        return c.digits_csv.empty() ? synthetic_digits_split(c.seed, c.synthetic_n, c.test_fraction)
                                    : load_digits(c.digits_csv, c.seed, c.test_fraction);
    });
    s.train = std::move(data.train);
    s.test = std::move(data.test);
    s.data_source = data.source;
    const TrainConfig tl = train_config(c.logistic, log_defaults, c.seed);
    s.pca = stage("fit PCA", [&] { return fit_pca(s.train, k); });
    const Pipeline proj({s.pca.module});
    const Dataset scores = Dataset::classification(predict(proj, s.train.x), s.train.labels, s.train.classes);
    auto head = stage("fit logistic on PCA scores", [&] { return fit_logistic(scores, tl); });
    auto mlp = stage("train MLP", [&] { return train_mlp(s.train, tm); });
    s.models.push_back({"pca", Pipeline({s.pca.module, head.pipeline.modules().front()}, {Tap{"scores", 0}}),
                        "scores"});
    s.models.push_back({"mlp", std::move(mlp.pipeline), "hidden"});
    s.train_info = Json{{"pca_logistic", train_summary(head)}, {"mlp", train_summary(mlp)}};
    s.train_echo = Json{{"logistic", train_echo(tl)}, {"mlp", train_echo(tm)}};
    s.data_echo = Json{{"source", s.data_source},
                       {"n_train", s.train.size()},
                       {"n_test", s.test.size()},
                       {"test_fraction", c.test_fraction},
                       {"k", k},
                       {"hidden", 32}};
    if (c.digits_csv.empty()) s.data_echo["synthetic_n"] = c.synthetic_n;
    s.bases = stage("choose bases", [&] { return choose_bases(s.test.x, r.S, c.seed); });
    return s;
}

double test_error(const Model& m, const Dataset& test) { return classification_error(m.pipeline, test); }

// Coarse and aligned runs plus the metrics both classification experiments report.
ExperimentOutput run_two_families(const ExperimentConfig& c, ClassificationSetup& s, const Common& r,
                                  Clock::time_point t0) {
    const RngStream probe_rng(c.seed, StreamId::kProbes);
    auto coarse = run_family(s.models, s.bases, ProbeDesign::isotropic(r.sigma, r.J), r, "coarse",
                             probe_rng.derive(0));
    auto aligned = run_family(s.models, s.bases, ProbeDesign::aligned(s.pca.module.components, r.sigma, r.J), r,
                              "aligned", probe_rng.derive(1));
    const auto& rc = coarse.run.report;
    const auto& ra = aligned.run.report;

    std::vector<Jet> pca_jets = coarse.result.jets[0];
    const std::size_t k95 = select_k_variance(pca_jets, 0.95);

    ExperimentOutput out;
    out.report = header_json(c);
    Json cfg = common_echo(r);
    cfg["data"] = s.data_echo;
    cfg["training"] = s.train_echo;
    out.report["config"] = cfg;
    const std::string other = s.models[1].name;
    out.report["metrics"] = Json{
        {"data_source", s.data_source},
        {"n_train", s.train.size()},
        {"n_test", s.test.size()},
        {"test_error_pca", test_error(s.models[0], s.test)},
        {"test_error_" + other, test_error(s.models[1], s.test)},
        {"training", s.train_info},
        {"rank_pca_coarse", summary_to_json(rank_stats(rc, 0))},
        {"rank_" + other + "_coarse", summary_to_json(rank_stats(rc, 1))},
        {"rank_pca_aligned", summary_to_json(rank_stats(ra, 0))},
        {"rank_" + other + "_aligned", summary_to_json(rank_stats(ra, 1))},
        {"jetsim_coarse", summary_to_json(sim_stats(rc))},
        {"jetsim_aligned", summary_to_json(sim_stats(ra))},
        {"flag_coarse", std::string(mirage_flag_name(rc.pair_summaries[0].flag))},
        {"flag_aligned", std::string(mirage_flag_name(ra.pair_summaries[0].flag))},
        {"k_95_variance_pca_coarse", k95}};
    add_run(out, std::move(coarse.run));
    add_run(out, std::move(aligned.run));
    out.report["runs"] = Json::array();
    for (const auto& run : out.runs) out.report["runs"].push_back(run_json(run));
    out.report["wall_time_s"] = seconds_since(t0);
    return out;
}

ExperimentOutput run_pipeline_classification(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    // Per-base probes: the identity tap's retained directions follow Δ, so
    // redrawing Δ per base averages JetSim over probe draws.
    const Common r = resolve_common(c, 50, 32, 1e-2, true, ScaleAwareRidge{});
    auto s = build_mixture(c, r);
    auto out = run_two_families(c, s, r, t0);
    out.report["artifact_choices"] =
        Json::array({"data.separation", "data.latent_noise", "data.x_noise", "data.n_train", "data.n_test",
                     "training.logistic", "probes.per_base"});
    return out;
}

ExperimentOutput run_digits(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    const Common r = resolve_common(c, 50, 32, 1e-2, false, ScaleAwareRidge{});
    auto s = build_digits(c, r);
    auto out = run_two_families(c, s, r, t0);
    out.report["artifact_choices"] = Json::array({"S", "training.logistic", "training.mlp"});
    return out;
}

// ----------------------------------------------------------------- sweeps

std::vector<double> default_eps_grid() {
    // Sorted ascending: 10^-3.5, 10^-3, 10^-2, 10^-1.5, 10^-1.
    return {std::pow(10.0, -3.5), 1e-3, 1e-2, std::pow(10.0, -1.5), 1e-1};
}

std::size_t as_count(double v, const char* what) {
    if (!(v >= 1.0) || v != std::floor(v)) {
        throw ValidationError(std::string("sweep.values: ") + what + " must be positive integers");
    }
    return static_cast<std::size_t>(v);
}

Table sweep_table(const std::string& name, const std::vector<std::string>& channels) {
    Table t;
    t.header = {name, "mean_jetsim", "median_jetsim"};
    for (const auto& ch : channels) t.header.push_back("mean_rank:" + ch);
    return t;
}

std::vector<CsvField> sweep_row(CsvField value, const DiagnosticsReport& r) {
    std::vector<CsvField> row{std::move(value), sim_stats(r).mean, sim_stats(r).median};
    for (std::size_t ch = 0; ch < r.channels.size(); ++ch) row.emplace_back(rank_stats(r, ch).mean);
    return row;
}

ExperimentOutput run_sweep(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    const Common base = resolve_common(c, 50, 32, 1e-2, false, ScaleAwareRidge{});
    auto s = build_digits(c, base);
    const RngStream probe_rng(c.seed, StreamId::kProbes);

    ExperimentOutput out;
    out.report = header_json(c);
    Json cfg = common_echo(base);
    cfg["data"] = s.data_echo;
    cfg["training"] = s.train_echo;
    Json points = Json::array();
    Json metrics{{"data_source", s.data_source},
                 {"test_error_pca", test_error(s.models[0], s.test)},
                 {"test_error_mlp", test_error(s.models[1], s.test)}};

    std::vector<std::string> channels;
    for (const auto& m : s.models) channels.push_back(m.name + "/" + m.tap);

    if (c.experiment == "sweep_eps") {
        std::vector<double> grid = c.sweep_values.empty() ? default_eps_grid() : c.sweep_values;
        std::sort(grid.begin(), grid.end());
        cfg["sweep"] = Json{{"parameter", "sigma"}, {"values", grid}};
        Table t = sweep_table("sigma", channels);
        double lo = INFINITY, hi = -INFINITY, lo_all = INFINITY, hi_all = -INFINITY;
        for (double eps : grid) {
            if (!(eps > 0.0)) throw ValidationError("sweep.values: sigma values must be positive");
            Common r = base;
            r.sigma = eps;
            auto fam = run_family(s.models, s.bases, ProbeDesign::isotropic(eps, r.J), r,
                                  "sigma=" + format_double(eps), probe_rng);
            const double m = sim_stats(fam.run.report).mean;
            t.rows.push_back(sweep_row(eps, fam.run.report));
            out.plot.push_back({"sweep", "mean_jetsim", format_double(eps), m});
            points.push_back(Json{{"sigma", eps}, {"mean_jetsim", m}});
            lo_all = std::min(lo_all, m);
            hi_all = std::max(hi_all, m);
            if (eps >= 1e-3 * (1 - 1e-12) && eps <= 1e-1 * (1 + 1e-12)) {
                lo = std::min(lo, m);
                hi = std::max(hi, m);
            }
            out.runs.push_back(std::move(fam.run));
        }
        metrics["jetsim_range_1e-3_to_1e-1"] = hi >= lo ? hi - lo : 0.0;
        metrics["jetsim_range_all"] = hi_all - lo_all;
        out.sweep = std::move(t);
    } else if (c.experiment == "sweep_probes") {
        std::vector<double> grid = c.sweep_values.empty() ? std::vector<double>{8, 16, 32, 64} : c.sweep_values;
        std::sort(grid.begin(), grid.end());
        cfg["sweep"] = Json{{"parameter", "J"}, {"values", grid}};
        Table t = sweep_table("J", channels);
        std::optional<double> at32, at64;
        for (double v : grid) {
            const std::size_t J = as_count(v, "J");
            Common r = base;
            r.J = J;
            auto fam = run_family(s.models, s.bases, ProbeDesign::isotropic(r.sigma, J), r,
                                  "J=" + std::to_string(J), probe_rng);
            const double m = sim_stats(fam.run.report).mean;
            t.rows.push_back(sweep_row(static_cast<std::uint64_t>(J), fam.run.report));
            out.plot.push_back({"sweep", "mean_jetsim", std::to_string(J), m});
            points.push_back(Json{{"J", J}, {"mean_jetsim", m}});
            if (J == 32) at32 = m;
            if (J == 64) at64 = m;
            out.runs.push_back(std::move(fam.run));
        }
        if (at32 && at64) metrics["jetsim_abs_diff_J64_J32"] = std::abs(*at64 - *at32);
        out.sweep = std::move(t);
    } else {  // sweep_k
        auto fam = run_family(s.models, s.bases, ProbeDesign::isotropic(base.sigma, base.J), base, "coarse",
                              probe_rng);
        std::vector<double> grid = c.sweep_values;
        if (grid.empty()) {
            for (std::size_t k = 1; k <= s.train.dim(); ++k) grid.push_back(static_cast<double>(k));
        }
        std::sort(grid.begin(), grid.end());
        cfg["sweep"] = Json{{"parameter", "k"}, {"values", grid}};
        const std::size_t k95 = select_k_variance(fam.result.jets[0], 0.95);
        metrics["k_95_variance_pca"] = k95;
        Table t;
        t.header = {"k", "mean_jetsim", "median_jetsim", "mean_effective_k", "capped_fraction"};
        MojetOptions opt;
        opt.rank_tol = base.rank_tol;
        opt.thresholds = base.thresholds;
        for (double v : grid) {
            const std::size_t k = as_count(v, "k");
            opt.retain = ExplicitK{k};
            const DiagnosticsReport rep = stage("rediagnose k=" + std::to_string(k),
                                                [&] { return rediagnose(fam.result, opt); });
            double eff = 0.0;
            std::size_t capped = 0, defined = 0;
            for (const auto& b : rep.bases) {
                if (!b.sims[0]) continue;
                ++defined;
                eff += static_cast<double>(std::min(b.sims[0]->k_a, b.sims[0]->k_b));
                if (b.sims[0]->capped) ++capped;
            }
            const double m = sim_stats(rep).mean;
            const double denom = defined == 0 ? 1.0 : static_cast<double>(defined);
            t.rows.push_back({static_cast<std::uint64_t>(k), m, sim_stats(rep).median, eff / denom,
                              static_cast<double>(capped) / denom});
            out.plot.push_back({"sweep", "mean_jetsim", std::to_string(k), m});
            points.push_back(Json{{"k", k}, {"mean_jetsim", m}, {"capped_fraction", capped / denom}});
        }
        out.runs.push_back(std::move(fam.run));
        out.sweep = std::move(t);
    }
    metrics["points"] = points;
    out.report["config"] = cfg;
    out.report["artifact_choices"] = Json::array({"S", "training.logistic", "training.mlp"});
    out.report["metrics"] = metrics;
    out.report["runs"] = Json::array();
    for (const auto& run : out.runs) {
        out.report["runs"].push_back(run_json(run));
        add_plot_rows(out, run);
    }
    out.report["wall_time_s"] = seconds_since(t0);
    return out;
}

// ------------------------------------------------------------------- cost

ExperimentOutput run_cost(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    const Common base = resolve_common(c, 200, 32, 1e-2, false, ScaleAwareRidge{});
    auto s = build_digits(c, base);
    std::vector<double> grid = c.sweep_values.empty() ? std::vector<double>{32, 64} : c.sweep_values;
    std::sort(grid.begin(), grid.end());
    const RngStream probe_rng(c.seed, StreamId::kProbes);

    ExperimentOutput out;
    out.report = header_json(c);
    Json cfg = common_echo(base);
    cfg["data"] = s.data_echo;
    cfg["training"] = s.train_echo;
    cfg["sweep"] = Json{{"parameter", "J"}, {"values", grid}};
    Json rows = Json::array();
    for (double v : grid) {
        const std::size_t J = as_count(v, "J");
        Common r = base;
        r.J = J;
        auto fam = run_family(s.models, s.bases, ProbeDesign::isotropic(r.sigma, J), r,
                              "J=" + std::to_string(J), probe_rng);
        const auto& cost = fam.run.report.cost;
        rows.push_back(Json{{"J", J},
                            {"n_jet", s.bases.size()},
                            {"M", s.models.size()},
                            {"probe_passes", cost.probe_passes},
                            {"expected_probe_passes", s.bases.size() * J * s.models.size()},
                            {"base_passes", cost.base_passes},
                            {"counted_forward_passes", fam.run.counted_passes},
                            {"mean_jetsim", sim_stats(fam.run.report).mean},
                            {"wall_time_s", cost.wall_time_s}});
        out.plot.push_back({"cost", "probe_passes", std::to_string(J), static_cast<double>(cost.probe_passes)});
        out.runs.push_back(std::move(fam.run));
    }
    out.report["config"] = cfg;
    out.report["artifact_choices"] = Json::array({"training.logistic", "training.mlp"});
    out.report["metrics"] = Json{{"data_source", s.data_source}, {"rows", rows}};
    out.report["runs"] = Json::array();
    for (const auto& run : out.runs) {
        out.report["runs"].push_back(run_json(run));
        add_plot_rows(out, run);
    }
    out.report["wall_time_s"] = seconds_since(t0);
    return out;
}

// ------------------------------------------------------------ config I/O

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError("config" + where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ValidationError("config" + where + ": unknown key '" + key + "'");
    }
}

template <class T>
std::optional<T> opt_get(const Json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<std::int64_t>() >= 0)) {
                throw ValidationError("");
            }
        } else if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) throw ValidationError("");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) throw ValidationError("");
        } else {
            if (!it->is_string()) throw ValidationError("");
        }
        return it->template get<T>();
    } catch (const std::exception&) {
        throw ValidationError("config" + where + "." + key + ": wrong type");
    }
}

TrainOverrides parse_train(const Json& j, const std::string& where) {
    check_keys(j, {"epochs", "step_size", "batch_size", "l2"}, where);
    TrainOverrides o;
    o.epochs = opt_get<std::size_t>(j, "epochs", where);
    o.step_size = opt_get<double>(j, "step_size", where);
    o.batch_size = opt_get<std::size_t>(j, "batch_size", where);
    o.l2 = opt_get<double>(j, "l2", where);
    return o;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"linreg",    "deep_regressor", "pipeline_classification",
                                                   "digits",    "sweep_eps",      "sweep_probes",
                                                   "sweep_k",   "cost"};
    return names;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    check_keys(j, {"experiment", "seed", "sizes", "probes", "ridge", "tolerances", "thresholds", "data",
                   "training", "replicas", "sweep"},
               "");
    ExperimentConfig c;
    c.experiment = opt_get<std::string>(j, "experiment", "").value_or("");
    c.seed = opt_get<std::uint64_t>(j, "seed", "").value_or(0);
    if (const auto it = j.find("sizes"); it != j.end()) {
        check_keys(*it, {"n_train", "n_test", "d", "k", "S", "J"}, ".sizes");
        c.n_train = opt_get<std::size_t>(*it, "n_train", ".sizes");
        c.n_test = opt_get<std::size_t>(*it, "n_test", ".sizes");
        c.d = opt_get<std::size_t>(*it, "d", ".sizes");
        c.k = opt_get<std::size_t>(*it, "k", ".sizes");
        c.S = opt_get<std::size_t>(*it, "S", ".sizes");
        c.J = opt_get<std::size_t>(*it, "J", ".sizes");
    }
    if (const auto it = j.find("probes"); it != j.end()) {
        check_keys(*it, {"sigma", "per_base"}, ".probes");
        c.probe_sigma = opt_get<double>(*it, "sigma", ".probes");
        c.per_base_probes = opt_get<bool>(*it, "per_base", ".probes");
    }
    if (const auto it = j.find("ridge"); it != j.end()) c.ridge = ridge_from_json(*it);
    if (const auto it = j.find("tolerances"); it != j.end()) {
        check_keys(*it, {"rank"}, ".tolerances");
        c.rank_tol = opt_get<double>(*it, "rank", ".tolerances").value_or(c.rank_tol);
    }
    if (const auto it = j.find("thresholds"); it != j.end()) {
        check_keys(*it, {"hi", "lo"}, ".thresholds");
        c.thresholds.hi = opt_get<double>(*it, "hi", ".thresholds").value_or(c.thresholds.hi);
        c.thresholds.lo = opt_get<double>(*it, "lo", ".thresholds").value_or(c.thresholds.lo);
    }
    if (const auto it = j.find("data"); it != j.end()) {
        check_keys(*it, {"noise_sigma", "x_noise", "y_noise", "separation", "latent_noise", "digits_csv",
                         "synthetic_n", "test_fraction"},
                   ".data");
        c.noise_sigma = opt_get<double>(*it, "noise_sigma", ".data");
        c.x_noise = opt_get<double>(*it, "x_noise", ".data");
        c.y_noise = opt_get<double>(*it, "y_noise", ".data");
        c.separation = opt_get<double>(*it, "separation", ".data");
        c.latent_noise = opt_get<double>(*it, "latent_noise", ".data");
        c.digits_csv = opt_get<std::string>(*it, "digits_csv", ".data").value_or("");
        c.synthetic_n = opt_get<std::size_t>(*it, "synthetic_n", ".data").value_or(c.synthetic_n);
        c.test_fraction = opt_get<double>(*it, "test_fraction", ".data").value_or(c.test_fraction);
    }
    if (const auto it = j.find("training"); it != j.end()) {
        check_keys(*it, {"logistic", "mlp"}, ".training");
        if (it->contains("logistic")) c.logistic = parse_train((*it)["logistic"], ".training.logistic");
        if (it->contains("mlp")) c.mlp = parse_train((*it)["mlp"], ".training.mlp");
    }
    c.replicas = opt_get<std::size_t>(j, "replicas", "").value_or(c.replicas);
    if (const auto it = j.find("sweep"); it != j.end()) {
        check_keys(*it, {"values"}, ".sweep");
        if (const auto v = it->find("values"); v != it->end()) c.sweep_values = vector_from_json(*v, "config.sweep.values");
    }
    return c;
}

void ExperimentConfig::validate() const {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), experiment) == names.end()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        throw ValidationError("config: unknown experiment '" + experiment + "' (expected one of " + list + ")");
    }
    for (const auto* v : {&n_train, &n_test, &d, &k, &S, &J}) {
        if (*v && **v == 0) throw ValidationError("config.sizes: sizes must be positive");
    }
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw ValidationError("config.tolerances.rank: must lie in (0, 1)");
    if (!(thresholds.lo >= 0.0 && thresholds.lo <= thresholds.hi && thresholds.hi <= 1.0)) {
        throw ValidationError("config.thresholds: need 0 <= lo <= hi <= 1");
    }
    for (const auto* v : {&noise_sigma, &x_noise, &y_noise, &separation, &latent_noise}) {
        if (*v && !(**v >= 0.0)) throw ValidationError("config.data: noise and separation must be >= 0");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError("config.data.test_fraction: must lie in (0, 1)");
    }
    for (const auto* o : {&logistic, &mlp}) {
        if (o->epochs && *o->epochs == 0) throw ValidationError("config.training: epochs must be positive");
        if (o->step_size && !(*o->step_size > 0.0)) {
            throw ValidationError("config.training: step_size must be positive");
        }
        if (o->l2 && !(*o->l2 >= 0.0)) throw ValidationError("config.training: l2 must be >= 0");
    }
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::string& e = config.experiment;
    ExperimentOutput out;
    if (e == "linreg") {
        out = run_linreg(config);
    } else if (e == "deep_regressor") {
        out = run_deep_regressor(config);
    } else if (e == "pipeline_classification") {
        out = run_pipeline_classification(config);
    } else if (e == "digits") {
        out = run_digits(config);
    } else if (e == "cost") {
        out = run_cost(config);
    } else {
        out = run_sweep(config);
    }
    out.cost = cost_table(out.runs);
    return out;
}

void write_outputs(const ExperimentOutput& out, const std::filesystem::path& dir, bool plot_data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
    write_json_file(dir / "report.json", out.report);

    CsvWriter ranks(dir / "ranks.csv");
    ranks.row({std::string("run"), std::string("base_id"), std::string("tap"), std::string("rank"),
               std::string("s1"), std::string("s_k")});
    CsvWriter sims(dir / "jetsim.csv");
    sims.row({std::string("run"), std::string("base_id"), std::string("pair"), std::string("score")});
    for (const auto& run : out.runs) {
        const auto& r = run.report;
        for (const auto& b : r.bases) {
            for (std::size_t c = 0; c < r.channels.size(); ++c) {
                const auto& rk = b.ranks[c];
                const double s1 = rk.singular_values.empty() ? 0.0 : rk.singular_values.front();
                const double sk = rk.rank == 0 ? 0.0 : rk.singular_values[rk.rank - 1];
                ranks.row({run.label, static_cast<std::uint64_t>(b.base_id), r.channels[c],
                           static_cast<std::uint64_t>(rk.rank), s1, sk});
            }
            for (std::size_t p = 0; p < r.pairs.size(); ++p) {
                sims.row({run.label, static_cast<std::uint64_t>(b.base_id), pair_label(r, p),
                          b.sims[p] ? CsvField(b.sims[p]->score) : CsvField(std::string())});
            }
        }
    }

    auto write_table = [&](const std::filesystem::path& path, const Table& t) {
        CsvWriter w(path);
        std::vector<CsvField> header(t.header.begin(), t.header.end());
        w.row(header);
        for (const auto& row : t.rows) w.row(row);
    };
    write_table(dir / "cost.csv", out.cost);
    if (out.sweep) write_table(dir / "sweep.csv", *out.sweep);
    for (const auto& [name, t] : out.figures) write_table(dir / (name + ".csv"), t);

    if (plot_data) {
        CsvWriter w(dir / "plot_data.csv");
        w.row({std::string("experiment"), std::string("run"), std::string("series"), std::string("x"),
               std::string("y")});
        const std::string exp = out.report.value("experiment", std::string());
        for (const auto& p : out.plot) w.row({exp, p.run, p.series, p.x, p.y});
    }
}

Json strip_timing(const Json& j) {
    if (j.is_object()) {
        Json out = Json::object();
        for (const auto& [key, value] : j.items()) {
            if (key == "wall_time_s") continue;
            out[key] = strip_timing(value);
        }
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& v : j) out.push_back(strip_timing(v));
        return out;
    }
    return j;
}

}  // namespace mojet
