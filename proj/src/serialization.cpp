#include "mojet/serialization.hpp"

#include <cstdio>
#include <sstream>

#include "mojet/errors.hpp"

namespace mojet {

namespace {

const Json& field(const Json& j, const char* key, std::string_view what) {
    if (!j.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
    const auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string(what) + ": missing field '" + key + "'");
    return *it;
}

double number(const Json& j, std::string_view what) {
    if (!j.is_number()) throw ValidationError(std::string(what) + ": expected a number");
    return j.get<double>();
}

std::size_t count(const Json& j, std::string_view what) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        throw ValidationError(std::string(what) + ": expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

std::string text(const Json& j, std::string_view what) {
    if (!j.is_string()) throw ValidationError(std::string(what) + ": expected a string");
    return j.get<std::string>();
}

Json vector_json(std::span<const double> v) { return Json(std::vector<double>(v.begin(), v.end())); }

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r)));
    return rows;
}

Matrix matrix_from_json(const Json& j, std::string_view what) {
    if (!j.is_array() || j.empty()) throw ValidationError(std::string(what) + ": expected a non-empty array of rows");
    std::vector<Vector> rows;
    for (const auto& r : j) rows.push_back(vector_from_json(r, what));
    const std::size_t cols = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != cols) throw ValidationError(std::string(what) + ": ragged rows");
    }
    return Matrix::from_rows(rows);
}

Vector vector_from_json(const Json& j, std::string_view what) {
    if (!j.is_array()) throw ValidationError(std::string(what) + ": expected an array of numbers");
    Vector v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(number(x, what));
    return v;
}

Json module_to_json(const Module& m) {
    Json j;
    j["kind"] = std::string(kind_name(m));
    if (const auto* l = std::get_if<Linear>(&m)) {
        j["weights"] = matrix_to_json(l->weights);
        j["bias"] = l->bias ? vector_json(*l->bias) : Json(nullptr);
    } else if (const auto* s = std::get_if<Standardize>(&m)) {
        j["mean"] = vector_json(s->mean);
        j["scale"] = vector_json(s->scale);
    } else if (const auto* p = std::get_if<PcaProject>(&m)) {
        j["components"] = matrix_to_json(p->components);
        j["mean"] = vector_json(p->mean);
    } else if (const auto* a = std::get_if<Activation>(&m)) {
        j["fn"] = std::string(activation_name(a->fn));
        j["dim"] = a->dim;
    } else if (const auto* h = std::get_if<LogisticHead>(&m)) {
        j["weights"] = matrix_to_json(h->weights);
        j["bias"] = vector_json(h->bias);
    } else {
        j["dim"] = std::get<Identity>(m).dim;
    }
    return j;
}

Module module_from_json(const Json& j) {
    const std::string kind = text(field(j, "kind", "module"), "module.kind");
    Module m;
    if (kind == "linear") {
        Linear l{matrix_from_json(field(j, "weights", "linear"), "linear.weights"), std::nullopt};
        if (const auto it = j.find("bias"); it != j.end() && !it->is_null()) {
            l.bias = vector_from_json(*it, "linear.bias");
        }
        m = std::move(l);
    } else if (kind == "standardize") {
        m = Standardize{vector_from_json(field(j, "mean", "standardize"), "standardize.mean"),
                        vector_from_json(field(j, "scale", "standardize"), "standardize.scale")};
    } else if (kind == "pca_project") {
        m = PcaProject{matrix_from_json(field(j, "components", "pca_project"), "pca_project.components"),
                       vector_from_json(field(j, "mean", "pca_project"), "pca_project.mean")};
    } else if (kind == "activation") {
        m = Activation{activation_from_name(text(field(j, "fn", "activation"), "activation.fn")),
                       count(field(j, "dim", "activation"), "activation.dim")};
    } else if (kind == "logistic_head") {
        m = LogisticHead{matrix_from_json(field(j, "weights", "logistic_head"), "logistic_head.weights"),
                         vector_from_json(field(j, "bias", "logistic_head"), "logistic_head.bias")};
    } else if (kind == "identity") {
        m = Identity{count(field(j, "dim", "identity"), "identity.dim")};
    } else {
        throw ValidationError("module: unknown kind '" + kind + "'");
    }
    validate_module(m);
    return m;
}

Json pipeline_to_json(const Pipeline& p) {
    Json j;
    j["modules"] = Json::array();
    for (const auto& m : p.modules()) j["modules"].push_back(module_to_json(m));
    j["taps"] = Json::array();
    for (const auto& t : p.taps()) j["taps"].push_back(Json{{"id", t.id}, {"module", t.module_index}});
    return j;
}

Pipeline pipeline_from_json(const Json& j) {
    const Json& mods = field(j, "modules", "pipeline");
    if (!mods.is_array()) throw ValidationError("pipeline.modules: expected an array");
    std::vector<Module> modules;
    for (const auto& m : mods) modules.push_back(module_from_json(m));
    std::vector<Tap> taps;
    if (const auto it = j.find("taps"); it != j.end()) {
        if (!it->is_array()) throw ValidationError("pipeline.taps: expected an array");
        for (const auto& t : *it) {
            taps.push_back(Tap{text(field(t, "id", "tap"), "tap.id"), count(field(t, "module", "tap"), "tap.module")});
        }
    }
    return Pipeline(std::move(modules), std::move(taps));
}

Json probe_design_to_json(const ProbeDesign& d) {
    Json j;
    if (const auto* iso = std::get_if<Isotropic>(&d.kind)) {
        j["kind"] = "isotropic";
        j["sigma"] = iso->sigma;
        j["J"] = d.count;
    } else if (const auto* al = std::get_if<SubspaceAligned>(&d.kind)) {
        j["kind"] = "aligned";
        j["sigma"] = al->sigma;
        j["J"] = d.count;
        j["basis"] = matrix_to_json(al->basis);
    } else {
        const auto& ex = std::get<ExplicitBasis>(d.kind);
        j["kind"] = "explicit";
        j["J"] = ex.deltas.rows();
        j["deltas"] = matrix_to_json(ex.deltas);
    }
    return j;
}

ProbeDesign probe_design_from_json(const Json& j) {
    const std::string kind = text(field(j, "kind", "probes"), "probes.kind");
    ProbeDesign d;
    if (kind == "isotropic") {
        d = ProbeDesign::isotropic(number(field(j, "sigma", "probes"), "probes.sigma"),
                                   count(field(j, "J", "probes"), "probes.J"));
    } else if (kind == "aligned") {
        d = ProbeDesign::aligned(matrix_from_json(field(j, "basis", "probes"), "probes.basis"),
                                 number(field(j, "sigma", "probes"), "probes.sigma"),
                                 count(field(j, "J", "probes"), "probes.J"));
    } else if (kind == "explicit") {
        d = ProbeDesign::explicit_basis(matrix_from_json(field(j, "deltas", "probes"), "probes.deltas"));
    } else {
        throw ValidationError("probes.kind: unknown kind '" + kind + "'");
    }
    validate(d);
    return d;
}

Json ridge_to_json(const RidgePolicy& r) {
    if (const auto* s = std::get_if<ScaleAwareRidge>(&r)) return Json{{"policy", "scale_aware"}, {"alpha", s->alpha}};
    if (const auto* f = std::get_if<FixedRidge>(&r)) return Json{{"policy", "fixed"}, {"lambda", f->lambda}};
    return Json{{"policy", "zero"}};
}

RidgePolicy ridge_from_json(const Json& j) {
    const std::string policy = text(field(j, "policy", "ridge"), "ridge.policy");
    if (policy == "scale_aware") {
        const double alpha = j.contains("alpha") ? number(j["alpha"], "ridge.alpha") : kDefaultRidgeAlpha;
        if (!(alpha >= 0.0)) throw ValidationError("ridge.alpha: must be >= 0");
        return ScaleAwareRidge{alpha};
    }
    if (policy == "fixed") {
        const double lambda = number(field(j, "lambda", "ridge"), "ridge.lambda");
        if (!(lambda >= 0.0)) throw ValidationError("ridge.lambda: must be >= 0");
        return FixedRidge{lambda};
    }
    if (policy == "zero") return ZeroRidge{};
    throw ValidationError("ridge.policy: unknown policy '" + policy + "'");
}

Json jet_to_json(const Jet& jet) {
    Json j;
    j["tap"] = jet.tap;
    j["base_point"] = vector_json(jet.base_point);
    j["base_value"] = vector_json(jet.base_value);
    j["jacobian"] = matrix_to_json(jet.jacobian);
    j["lambda_used"] = jet.lambda_used;
    return j;
}

Jet jet_from_json(const Json& j) {
    Jet jet;
    jet.tap = text(field(j, "tap", "jet"), "jet.tap");
    jet.base_point = vector_from_json(field(j, "base_point", "jet"), "jet.base_point");
    jet.base_value = vector_from_json(field(j, "base_value", "jet"), "jet.base_value");
    jet.jacobian = matrix_from_json(field(j, "jacobian", "jet"), "jet.jacobian");
    jet.lambda_used = number(field(j, "lambda_used", "jet"), "jet.lambda_used");
    if (jet.jacobian.rows() != jet.base_value.size() || jet.jacobian.cols() != jet.base_point.size()) {
        throw ValidationError("jet: jacobian shape does not match base point / value");
    }
    return jet;
}

Json summary_to_json(const SummaryStats& s) {
    return Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p25", s.p25},
                {"p75", s.p75},     {"min", s.min},   {"max", s.max}};
}

Json cost_to_json(const CostCounters& c) {
    return Json{{"probe_passes", c.probe_passes}, {"base_passes", c.base_passes}, {"wall_time_s", c.wall_time_s}};
}

Json diagnostics_to_json(const DiagnosticsReport& r, bool per_base) {
    Json j;
    j["channels"] = r.channels;
    j["pairs"] = Json::array();
    for (std::size_t p = 0; p < r.pairs.size(); ++p) j["pairs"].push_back(pair_label(r, p));
    j["thresholds"] = Json{{"hi", r.thresholds.hi}, {"lo", r.thresholds.lo}};
    j["rank_summary"] = Json::array();
    for (const auto& c : r.channel_summaries) {
        j["rank_summary"].push_back(Json{{"channel", c.channel}, {"rank", summary_to_json(c.rank_stats)}});
    }
    j["jetsim_summary"] = Json::array();
    for (const auto& p : r.pair_summaries) {
        j["jetsim_summary"].push_back(Json{{"pair", p.channel_a + "|" + p.channel_b},
                                           {"score", summary_to_json(p.score_stats)},
                                           {"undefined", p.undefined},
                                           {"flag", std::string(mirage_flag_name(p.flag))}});
    }
    j["cost"] = cost_to_json(r.cost);
    if (per_base) {
        j["bases"] = Json::array();
        for (const auto& b : r.bases) {
            Json e;
            e["base_id"] = b.base_id;
            e["ranks"] = Json::array();
            for (const auto& rk : b.ranks) e["ranks"].push_back(rk.rank);
            e["jetsim"] = Json::array();
            for (const auto& s : b.sims) e["jetsim"].push_back(s ? Json(s->score) : Json(nullptr));
            j["bases"].push_back(std::move(e));
        }
    }
    return j;
}

Json factorization_to_json(const LinearFactorization& f) {
    return Json{{"H", matrix_to_json(f.h)}, {"w", vector_json(f.w)}, {"full_row_rank", f.full_row_rank}};
}

Json mirage_verification_to_json(const MirageVerification& v) {
    Json j;
    j["inputs"] = v.inputs;
    j["members"] = v.members.size();
    j["max_output_deviation"] = v.max_output_deviation;
    j["min_h_distance"] = v.min_h_distance;
    j["per_member"] = Json::array();
    for (const auto& m : v.members) {
        j["per_member"].push_back(Json{{"output_deviation", m.output_deviation},
                                       {"h_distance", m.h_distance},
                                       {"q_distance", m.q_distance},
                                       {"condition", m.condition}});
    }
    return j;
}

Json recovery_to_json(const RecoveryReport& r) {
    return Json{{"factorization", factorization_to_json(r.factorization)},
                {"jacobian_spread", r.jacobian_spread},
                {"tap_residual", r.tap_residual},
                {"output_residual", r.output_residual}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open JSON file '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
}

std::string CsvWriter::quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string q = "\"";
    for (char c : field) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

std::string CsvWriter::render(const std::vector<CsvField>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line += ',';
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    line += quote(v);
                } else if constexpr (std::is_same_v<T, double>) {
                    line += format_double(v);
                } else {
                    line += std::to_string(v);
                }
            },
            fields[i]);
    }
    line += "\r\n";
    return line;
}

void CsvWriter::row(const std::vector<CsvField>& fields) {
    out_ << render(fields);
    if (!out_) throw Error("write failed for '" + path_.string() + "'");
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cur;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < s.size() && s[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cur));
            cur.clear();
            any = true;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
            if (any || !cur.empty()) {
                row.push_back(std::move(cur));
                rows.push_back(std::move(row));
            }
            cur.clear();
            row.clear();
            any = false;
        } else {
            cur += c;
            any = true;
        }
    }
    if (quoted) throw DataError("CSV file '" + path.string() + "' ends inside a quoted field");
    if (any || !cur.empty()) {
        row.push_back(std::move(cur));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ranks_csv(const DiagnosticsReport& r, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({std::string("base_id"), std::string("tap"), std::string("rank"), std::string("s1"), std::string("s_k")});
    for (const auto& b : r.bases) {
        for (std::size_t c = 0; c < r.channels.size(); ++c) {
            const auto& rk = b.ranks[c];
            const double s1 = rk.singular_values.empty() ? 0.0 : rk.singular_values.front();
            const double sk = rk.rank == 0 ? 0.0 : rk.singular_values[rk.rank - 1];
            w.row({static_cast<std::uint64_t>(b.base_id), r.channels[c], static_cast<std::uint64_t>(rk.rank), s1, sk});
        }
    }
}

void write_jetsim_csv(const DiagnosticsReport& r, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({std::string("base_id"), std::string("pair"), std::string("score")});
    for (const auto& b : r.bases) {
        for (std::size_t p = 0; p < r.pairs.size(); ++p) {
            if (b.sims[p]) {
                w.row({static_cast<std::uint64_t>(b.base_id), pair_label(r, p), b.sims[p]->score});
            } else {
                w.row({static_cast<std::uint64_t>(b.base_id), pair_label(r, p), std::string()});
            }
        }
    }
}

void write_train_log_csv(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({std::string("epoch"), std::string("loss"), std::string("step_size")});
    for (const auto& e : log) w.row({static_cast<std::uint64_t>(e.epoch), e.loss, e.step_size});
}

}  // namespace mojet
