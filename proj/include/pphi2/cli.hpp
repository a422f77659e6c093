#pragma once

// Batch front end: config parsing and validation, task dispatch, report files.
//
// Config is YAML (JSON parses as YAML). Outputs in --out-dir:
//   report.json  header field first, then config echo and results
//   table.csv    scans only, one row per lambda or T
//   plot.dat     whitespace-separated x y columns
// table.csv and plot.dat start with "# pphi2 <version> config <hash>".

#include "pphi2/agmon.hpp"
#include "pphi2/error.hpp"
#include "pphi2/fock.hpp"
#include "pphi2/harmonic.hpp"
#include "pphi2/instanton.hpp"
#include "pphi2/potential.hpp"
#include "pphi2/quad.hpp"
#include "pphi2/spectral.hpp"
#include "pphi2/verify.hpp"
#include "pphi2/version.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pphi2::cli {

using Json = nlohmann::ordered_json;

enum ExitCode { ok = 0, validation_failure = 1, numerical_failure = 2 };

// ---------------------------------------------------------------------------
// number formatting, locale independent

template <class T>
std::string fmt(T x)
{
    if (std::isnan(static_cast<double>(x))) return "nan";
    if (std::isinf(static_cast<double>(x))) return x > 0 ? "inf" : "-inf";
    if (x == 0) return "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// YAML access with field-named errors

inline Json to_json(const YAML::Node& n)
{
    switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
        Json a = Json::array();
        for (const auto& e : n) a.push_back(to_json(e));
        return a;
    }
    case YAML::NodeType::Map: {
        Json o = Json::object();
        for (const auto& kv : n) o[kv.first.as<std::string>()] = to_json(kv.second);
        return o;
    }
    case YAML::NodeType::Scalar: {
        const std::string s = n.Scalar();
        if (n.Tag() == "!") return s;  // quoted
        if (s == "true" || s == "false") return s == "true";
        long long i = 0;
        auto ri = std::from_chars(s.data(), s.data() + s.size(), i);
        if (ri.ec == std::errc() && ri.ptr == s.data() + s.size()) return i;
        double d = 0;
        auto rd = std::from_chars(s.data(), s.data() + s.size(), d);
        if (rd.ec == std::errc() && rd.ptr == s.data() + s.size()) return d;
        return s;
    }
    }
    return nullptr;
}

class Node {
public:
    Node(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    bool has(const std::string& key) const { return node_.IsMap() && node_[key] && !node_[key].IsNull(); }
    const YAML::Node& raw() const { return node_; }

    Node child(const std::string& key) const
    {
        if (!has(key)) fail(key, "required field is missing");
        return {node_[key], join(key)};
    }

    std::optional<Node> maybe(const std::string& key) const
    {
        if (!has(key)) return std::nullopt;
        return Node(node_[key], join(key));
    }

    void require_map() const
    {
        if (!node_.IsMap()) throw ValidationError(path_ + ": expected a section of key: value pairs");
    }

    void allow_only(std::initializer_list<const char*> keys) const
    {
        require_map();
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& kv : node_) {
            const auto k = kv.first.as<std::string>();
            if (!allowed.count(k)) fail(k, "unknown field");
        }
    }

    double number() const
    {
        if (!node_.IsScalar()) throw ValidationError(path_ + ": expected a number");
        const std::string s = node_.Scalar();
        double v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
            throw ValidationError(path_ + ": expected a finite number, got '" + s + "'");
        return v;
    }

    long long integer() const
    {
        if (!node_.IsScalar()) throw ValidationError(path_ + ": expected an integer");
        const std::string s = node_.Scalar();
        long long v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            throw ValidationError(path_ + ": expected an integer, got '" + s + "'");
        return v;
    }

    std::string text() const
    {
        if (!node_.IsScalar()) throw ValidationError(path_ + ": expected a string");
        return node_.Scalar();
    }

    bool flag() const
    {
        const auto s = text();
        if (s == "true" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "no" || s == "off") return false;
        throw ValidationError(path_ + ": expected true or false, got '" + s + "'");
    }

    std::vector<double> numbers() const
    {
        if (!node_.IsSequence()) throw ValidationError(path_ + ": expected a list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < node_.size(); ++i) out.push_back(Node(node_[i], path_ + "[" + std::to_string(i) + "]").number());
        return out;
    }

    // typed getters with defaults and range checks
    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (!fallback) fail(key, "required field is missing");
            return *fallback;
        }
        return child(key).number();
    }

    double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const
    {
        const double v = number(key, fallback);
        if (!(v > 0)) fail(key, "must be > 0, got " + fmt(v));
        return v;
    }

    int integer(const std::string& key, long long lo, long long hi, std::optional<long long> fallback = std::nullopt) const
    {
        long long v = 0;
        if (!has(key)) {
            if (!fallback) fail(key, "required field is missing");
            v = *fallback;
        } else {
            v = child(key).integer();
        }
        if (v < lo || v > hi) fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + std::to_string(v));
        return static_cast<int>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (!fallback) fail(key, "required field is missing");
            return *fallback;
        }
        return child(key).text();
    }

    bool flag(const std::string& key, bool fallback) const { return has(key) ? child(key).flag() : fallback; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ValidationError(join(key) + ": " + what);
    }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node node_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// model

struct Model {
    BasisPtr basis;
    std::optional<ClassicalPotential> potential;
    Json summary;
};

inline Vector cutoff_samples(const Node& node, const BasisPtr& basis)
{
    const int n = basis->num_nodes();
    if (node.raw().IsSequence()) {
        const auto v = node.numbers();
        if (static_cast<int>(v.size()) != n)
            throw ValidationError(node.path() + ": expected " + std::to_string(n) + " samples, got " + std::to_string(v.size()));
        Vector g(n);
        for (int j = 0; j < n; ++j) {
            if (!(v[j] >= 0)) throw ValidationError(node.path() + "[" + std::to_string(j) + "]: must be >= 0");
            g[j] = v[j];
        }
        return g;
    }
    const auto s = node.text();
    if (s == "uniform") return Vector::Ones(n);
    if (s == "zero") return Vector::Zero(n);
    if (s == "bump") {
        // smooth compactly supported bump on the middle half of the interval
        const double l = basis->grid().length();
        Vector g(n);
        for (int j = 0; j < n; ++j) {
            const double y = basis->grid().node(j) / (0.25 * l);
            g[j] = std::abs(y) < 1 ? std::exp(1 - 1 / (1 - y * y)) : 0.0;
        }
        return g;
    }
    throw ValidationError(node.path() + ": expected uniform|zero|bump or a list of samples, got '" + s + "'");
}

inline Model build_model(const Node& root)
{
    const Node m = root.child("model");
    m.allow_only({"mass", "length", "boundary", "nodes", "modes", "potential", "cutoff"});
    const double mass = m.positive("mass", 1.0);
    const double length = m.positive("length");
    const std::string bname = m.text("boundary", "periodic");
    Boundary boundary;
    if (bname == "periodic") boundary = Boundary::periodic;
    else if (bname == "dirichlet") boundary = Boundary::dirichlet;
    else if (bname == "neumann") boundary = Boundary::neumann;
    else m.fail("boundary", "expected periodic|dirichlet|neumann, got '" + bname + "'");
    const int nodes = m.integer("nodes", 2, 1 << 16);
    const int modes = m.integer("modes", 0, nodes, 0);

    Model out;
    out.basis = build_basis(Grid(length, nodes, boundary), mass, modes);
    out.summary = {{"mass", mass}, {"length", length}, {"boundary", bname}, {"nodes", nodes}, {"modes", out.basis->size()}};

    const Node p = m.child("potential");
    p.require_map();
    if (p.has("example") == p.has("polynomial")) {
        throw ValidationError(p.path() + ": give exactly one of 'example' or 'polynomial'");
    }
    if (p.has("example")) {
        p.allow_only({"example"});
        const Node e = p.child("example");
        e.allow_only({"a", "x0", "M0", "variant"});
        ExampleOptions opts;
        const auto variant = e.text("variant", "interval");
        if (variant == "interval") opts.variant = ExampleVariant::interval;
        else if (variant == "cutoff_family") opts.variant = ExampleVariant::cutoff_family;
        else e.fail("variant", "expected interval|cutoff_family, got '" + variant + "'");
        if (auto c = m.maybe("cutoff")) {
            if (opts.variant == ExampleVariant::interval) c->fail("", "not allowed with the interval example (g = 1)");
            opts.cutoff = cutoff_samples(*c, out.basis);
        }
        const double a = e.positive("a"), x0 = e.positive("x0");
        const int m0 = e.integer("M0", 1, 8, 1);
        try {
            out.potential = make_example_potential(a, x0, m0, out.basis, opts);
        } catch (const ValidationError& err) {
            throw ValidationError(e.path() + ": " + err.what());
        }
        out.summary["potential"] = {{"example", {{"a", a}, {"x0", x0}, {"M0", m0}, {"variant", variant}}},
                                    {"normalization_shift", out.potential->normalization_shift()}};
    } else {
        p.allow_only({"polynomial"});
        const auto coeffs = p.child("polynomial").numbers();
        Vector g = Vector::Ones(nodes);
        if (auto c = m.maybe("cutoff")) g = cutoff_samples(*c, out.basis);
        try {
            out.potential.emplace(out.basis, PolynomialPotential(coeffs), CutoffFunction(g));
        } catch (const ValidationError& err) {
            throw ValidationError(p.path() + ".polynomial: " + err.what());
        }
        out.summary["potential"] = {{"polynomial", coeffs}};
    }
    return out;
}

// ---------------------------------------------------------------------------
// field specs: zero | constant:<c> | mode:<k> | minimizer:<i>

class FieldResolver {
public:
    explicit FieldResolver(const ClassicalPotential& pot, int threads) : pot_(pot), threads_(threads) {}

    const std::vector<Minimizer>& minimizers()
    {
        if (!mins_) {
            MinimizerOptions opts;
            opts.threads = threads_;
            auto report = find_minimizers(pot_, {Field::zero(pot_.basis())}, 1e-10, opts);
            std::sort(report.minimizers.begin(), report.minimizers.end(), [](const auto& a, const auto& b) {
                return a.field.coefficients()[0] < b.field.coefficients()[0];
            });
            mins_ = std::move(report.minimizers);
        }
        return *mins_;
    }

    Field resolve(const Node& node)
    {
        const auto spec = node.text();
        const auto colon = spec.find(':');
        const std::string kind = spec.substr(0, colon);
        const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
        auto bad = [&]() -> ValidationError {
            return ValidationError(node.path() + ": expected zero|constant:<c>|mode:<k>|minimizer:<i>, got '" + spec + "'");
        };
        auto parse_int = [&]() {
            int v = 0;
            const auto r = std::from_chars(arg.data(), arg.data() + arg.size(), v);
            if (r.ec != std::errc() || r.ptr != arg.data() + arg.size()) throw bad();
            return v;
        };
        if (kind == "zero" && arg.empty()) return Field::zero(pot_.basis());
        if (kind == "constant") {
            double c = 0;
            const auto r = std::from_chars(arg.data(), arg.data() + arg.size(), c);
            if (r.ec != std::errc() || r.ptr != arg.data() + arg.size() || !std::isfinite(c)) throw bad();
            return Field::constant(pot_.basis(), c);
        }
        if (kind == "mode") {
            const int k = parse_int();
            if (k < 0 || k >= pot_.basis()->size())
                throw ValidationError(node.path() + ": mode index " + std::to_string(k) + " out of range [0, " +
                                      std::to_string(pot_.basis()->size() - 1) + "]");
            return Field::mode(pot_.basis(), k);
        }
        if (kind == "minimizer") {
            const int i = parse_int();
            const auto& m = minimizers();
            if (i < 0 || i >= static_cast<int>(m.size()))
                throw ValidationError(node.path() + ": minimizer index " + std::to_string(i) + " out of range, found " +
                                      std::to_string(m.size()));
            return m[i].field;
        }
        throw bad();
    }

private:
    const ClassicalPotential& pot_;
    int threads_;
    std::optional<std::vector<Minimizer>> mins_;
};

// ---------------------------------------------------------------------------
// run

struct Settings {
    std::uint64_t seed = 1;
    int threads = 1;
};

struct Outputs {
    Json report;
    std::vector<std::string> table_columns;
    std::vector<std::vector<std::string>> table_rows;
    std::vector<std::string> plot_columns;
    std::vector<std::vector<std::string>> plot_rows;
    bool failed = false;  ///< numerical failure or non-convergence
};

inline std::vector<double> lambda_list(const Node& task, const std::string& key)
{
    const Node n = task.child(key);
    std::vector<double> out;
    if (n.raw().IsSequence()) {
        out = n.numbers();
    } else {
        n.allow_only({"from", "to", "step"});
        const double a = n.number("from"), b = n.number("to"), s = n.positive("step");
        if (!(b >= a)) n.fail("to", "must be >= from");
        const int count = static_cast<int>(std::floor((b - a) / s + 1e-9)) + 1;
        if (count > 100000) n.fail("step", "too many entries");
        for (int i = 0; i < count; ++i) out.push_back(a + i * s);
    }
    if (out.empty()) n.fail("", "list is empty");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] > 0)) throw ValidationError(n.path() + "[" + std::to_string(i) + "]: must be > 0");
        if (i > 0 && !(out[i] > out[i - 1])) throw ValidationError(n.path() + ": entries must be strictly increasing");
    }
    return out;
}

inline Json field_json(const Field& f)
{
    return {{"mean", f.values().mean()}, {"l2_norm", f.l2_norm()}, {"coefficients", std::vector<double>(f.coefficients().data(), f.coefficients().data() + f.coefficients().size())}};
}

inline void run_minimize(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "tol", "max_iterations", "starts"});
    const double tol = task.positive("tol", 1e-10);
    MinimizerOptions opts;
    opts.max_iterations = task.integer("max_iterations", 1, 1000000, 200);
    opts.threads = s.threads;
    const auto& pot = *model.potential;
    std::vector<Field> starts{Field::zero(pot.basis())};
    if (auto st = task.maybe("starts")) {
        if (!st->raw().IsSequence()) throw ValidationError(st->path() + ": expected a list of field specs");
        FieldResolver r(pot, s.threads);
        starts.clear();
        for (std::size_t i = 0; i < st->raw().size(); ++i) starts.push_back(r.resolve(Node(st->raw()[i], st->path() + "[" + std::to_string(i) + "]")));
    }
    auto report = find_minimizers(pot, starts, tol, opts);
    std::sort(report.minimizers.begin(), report.minimizers.end(),
              [](const auto& a, const auto& b) { return a.field.coefficients()[0] < b.field.coefficients()[0]; });
    Json mins = Json::array();
    for (const auto& z : report.minimizers) {
        Json j = field_json(z.field);
        j["U"] = z.value;
        j["hessian_smallest_eigenvalue"] = z.smallest_eigenvalue;
        j["nondegenerate"] = z.nondegenerate;
        mins.push_back(j);
    }
    Json starts_json = Json::array();
    for (const auto& o : report.starts)
        starts_json.push_back({{"start_value", o.start_value}, {"final_value", o.final_value}, {"gradient_norm", o.gradient_norm},
                               {"iterations", o.iterations}, {"converged", o.converged}, {"saddle", o.saddle}, {"minimizer", o.minimizer}});
    out.report["results"] = {{"minimizers", mins}, {"min_U", report.min_value()}, {"starts", starts_json}, {"warnings", report.warnings}};
    const Vector x = pot.basis()->grid().nodes();
    out.plot_columns = {"x"};
    for (std::size_t i = 0; i < report.minimizers.size(); ++i) out.plot_columns.push_back("h" + std::to_string(i));
    for (int j = 0; j < x.size(); ++j) {
        std::vector<std::string> row{fmt(x[j])};
        for (const auto& z : report.minimizers) row.push_back(fmt(z.field.values()[j]));
        out.plot_rows.push_back(row);
    }
    out.failed = report.minimizers.empty();
}

inline void run_harmonic(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "field", "K"});
    const auto& pot = *model.potential;
    FieldResolver r(pot, s.threads);
    const Field h = task.has("field") ? r.resolve(task.child("field")) : r.resolve(Node(YAML::Node("minimizer:0"), task.path() + ".field"));
    const int k = task.integer("K", 0, pot.basis()->size(), 0);
    const Vector v = hessian_potential(pot, h);
    const auto basis = k == 0 ? pot.basis() : build_basis(pot.basis()->grid(), pot.mass(), k);
    const auto rep = harmonic_ground_energy(*basis, v);
    out.report["results"] = {{"energy", rep.energy}, {"hs_norm", rep.hs_norm}, {"smallest_eigenvalue", rep.smallest_eigenvalue},
                             {"modes", basis->size()}, {"field", field_json(h)}};
    const Vector x = pot.basis()->grid().nodes();
    out.plot_columns = {"x", "v"};
    for (int j = 0; j < x.size(); ++j) out.plot_rows.push_back({fmt(x[j]), fmt(v[j])});
}

inline void run_agmon(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "from", "to", "knots", "search_modes", "max_iterations", "gradient_tol", "refine", "extension_time"});
    const auto& pot = *model.potential;
    FieldResolver r(pot, s.threads);
    const Field h = r.resolve(task.child("from")), k = r.resolve(task.child("to"));
    AgmonOptions opts;
    opts.knots = task.integer("knots", 2, 1 << 14, 64);
    opts.search_modes = task.integer("search_modes", 1, pot.basis()->size(), std::min(16, pot.basis()->size()));
    opts.max_iterations = task.integer("max_iterations", 1, 10000000, 4000);
    opts.gradient_tol = task.positive("gradient_tol", 1e-11);
    opts.refine = task.flag("refine", true);
    opts.extension_time = task.positive("extension_time", 3.0);
    opts.threads = s.threads;
    const auto g = agmon_distance(pot, h, k, opts);
    Json restarts = Json::array();
    for (const auto& o : g.restarts)
        restarts.push_back({{"start", o.start}, {"initial_energy", o.initial_energy}, {"final_energy", o.final_energy},
                            {"iterations", o.iterations}, {"converged", o.converged}});
    out.report["results"] = {{"distance", g.distance}, {"length", g.length}, {"energy", g.energy},
                             {"coarse_distance", g.coarse_distance}, {"refinement_change", g.refinement_change},
                             {"iterations", g.iterations}, {"converged", g.converged}, {"upper_bound_only", g.upper_bound_only},
                             {"restarts", restarts}};
    if (pot.cutoff().samples().isZero()) out.report["results"]["free_field_lower_bound"] = free_field_lower_bound(h, k);
    out.plot_columns = {"t", "mean", "l2_norm"};
    for (Eigen::Index j = 0; j < g.path.times.size(); ++j) {
        const Field f = g.path.knot(static_cast<int>(j));
        out.plot_rows.push_back({fmt(g.path.times[j]), fmt(f.values().mean()), fmt(f.l2_norm())});
    }
    out.failed = !g.converged;
}

inline void run_instanton(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "from", "to", "T", "T_list", "time_step", "max_iterations", "tol", "warm_start"});
    const auto& pot = *model.potential;
    FieldResolver r(pot, s.threads);
    const Field h = r.resolve(task.child("from")), k = r.resolve(task.child("to"));
    InstantonOptions opts;
    opts.time_step = task.positive("time_step", 0.0125);
    opts.max_iterations = task.integer("max_iterations", 1, 100000, 100);
    opts.tol = task.positive("tol", 1e-9);
    opts.threads = s.threads;
    if (auto w = task.maybe("warm_start")) {
        w->allow_only({"a", "x0"});
        opts.tanh_warm_start = true;
        opts.warm_a = w->positive("a");
        opts.warm_x0 = w->positive("x0");
    }
    if (task.has("T") == task.has("T_list")) throw ValidationError(task.path() + ": give exactly one of 'T' or 'T_list'");

    if (task.has("T")) {
        const double T = task.positive("T");
        const auto [u, rep] = minimize_action(pot, h, k, T, opts);
        out.report["results"] = {{"T", T}, {"action", rep.action}, {"kinetic", rep.kinetic}, {"potential", rep.potential},
                                 {"double_integral", rep.double_integral}, {"residual", rep.residual},
                                 {"boundary_mismatch", rep.boundary_mismatch}, {"iterations", rep.iterations},
                                 {"converged", rep.converged}, {"time_nodes", u.time_nodes()}};
        const Vector avg = space_average(u);
        out.plot_columns = {"t", "mean"};
        for (int i = 0; i < u.time_nodes(); ++i) out.plot_rows.push_back({fmt(u.times[i]), fmt(avg[i])});
        out.failed = !rep.converged;
        return;
    }
    const auto Ts = lambda_list(task, "T_list");
    const auto scan = scan_T(pot, h, k, Ts, opts);
    Json rows = Json::array();
    out.table_columns = {"T", "action", "residual", "iterations", "converged"};
    out.plot_columns = {"T", "action"};
    bool all = true;
    for (const auto& row : scan.rows) {
        Json j{{"T", row.T}, {"action", row.action}, {"residual", row.residual}, {"iterations", row.iterations}, {"converged", row.converged}};
        if (!row.error.empty()) j["error"] = row.error;
        rows.push_back(j);
        out.table_rows.push_back({fmt(row.T), fmt(row.action), fmt(row.residual), std::to_string(row.iterations), row.converged ? "1" : "0"});
        out.plot_rows.push_back({fmt(row.T), fmt(row.action)});
        all = all && row.converged && row.error.empty();
    }
    out.report["results"] = {{"rows", rows}, {"strictly_decreasing", scan.strictly_decreasing}, {"smallest_drop", scan.smallest_drop}};
    out.failed = !all;
}

inline void run_spectrum(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "lambda", "K", "N_max", "count", "dense_limit"});
    const auto& pot = *model.potential;
    const double lambda = task.positive("lambda");
    const int k = task.integer("K", 1, pot.basis()->size());
    const int n_max = task.integer("N_max", pot.polynomial().degree(), 100000);
    const int count = task.integer("count", 1, 1000, 4);
    AssemblyOptions ao;
    ao.threads = s.threads;
    const auto h = assemble_hamiltonian<double>(pot, lambda, k, n_max, ao);
    if (count > static_cast<int>(h.dimension())) task.fail("count", "exceeds the basis dimension " + std::to_string(h.dimension()));
    SpectrumOptions so;
    so.lanczos.seed = s.seed;
    so.dense_limit = task.integer("dense_limit", 0, 20000, 0);
    const auto spec = lowest_eigenvalues<double>(h, count, so);
    out.report["results"] = {{"lambda", lambda}, {"K", k}, {"N_max", n_max}, {"dimension", h.dimension()},
                             {"eigenvalues", spec.eigenvalues}, {"residuals", spec.residuals}, {"norm_estimate", spec.norm_estimate},
                             {"iterations", spec.iterations}, {"symmetry_defect", h.max_asymmetry()}};
    out.plot_columns = {"index", "E"};
    for (std::size_t i = 0; i < spec.eigenvalues.size(); ++i) out.plot_rows.push_back({std::to_string(i), fmt(spec.eigenvalues[i])});
}

template <class Scalar>
std::vector<GapRow> gap_rows(const ClassicalPotential& pot, const std::vector<double>& lambdas, int k, int n_max, const ScanOptions& so)
{
    return gap_scan<Scalar>(pot, lambdas, k, n_max, so);
}

inline void run_gap_scan(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "lambdas", "K", "N_max", "precision", "dense_limit"});
    const auto& pot = *model.potential;
    const auto lambdas = lambda_list(task, "lambdas");
    const int k = task.integer("K", 1, pot.basis()->size(), 1);
    const int n_max = task.integer("N_max", pot.polynomial().degree(), 100000);
    const auto precision = task.text("precision", "double");
    ScanOptions so;
    so.threads = s.threads;
    so.assembly.threads = 1;
    so.spectrum.lanczos.seed = s.seed;
    so.spectrum.vectors = false;
    so.spectrum.dense_limit = task.integer("dense_limit", 0, 20000, 2000);
    std::vector<GapRow> rows;
    if (precision == "double") rows = gap_rows<double>(pot, lambdas, k, n_max, so);
    else if (precision == "quad") rows = gap_rows<Quad>(pot, lambdas, k, n_max, so);
    else task.fail("precision", "expected double|quad, got '" + precision + "'");

    out.table_columns = {"lambda", "E1", "E2", "gap", "log_gap", "slope"};
    out.plot_columns = {"lambda", "log_gap"};
    Json rj = Json::array();
    bool limited = false;
    for (const auto& r : rows) {
        out.table_rows.push_back({fmt(r.lambda), fmt(r.e1), fmt(r.e2), fmt(r.gap), fmt(r.log_gap), fmt(r.slope)});
        out.plot_rows.push_back({fmt(r.lambda), fmt(r.log_gap)});
        rj.push_back({{"lambda", r.lambda}, {"E1", fmt(r.e1)}, {"E2", fmt(r.e2)}, {"gap", fmt(r.gap)}, {"log_gap", r.log_gap},
                      {"slope", r.slope}, {"precision_limited", r.precision_limited}, {"ground_parity", r.ground_parity},
                      {"excited_parity", r.excited_parity}});
        limited = limited || r.precision_limited;
    }
    out.report["results"] = {{"precision", precision}, {"K", k}, {"N_max", n_max}, {"rows", rj}, {"precision_limited", limited}};
}

inline void run_limit_check(const Node& task, Model& model, const Settings& s, Outputs& out)
{
    task.allow_only({"kind", "lambdas", "K", "N_max"});
    const auto& pot = *model.potential;
    const auto lambdas = lambda_list(task, "lambdas");
    const int k = task.integer("K", 1, pot.basis()->size());
    const int n_max = task.integer("N_max", pot.polynomial().degree(), 100000);
    FieldResolver r(pot, s.threads);
    MinimizerReport mins;
    mins.minimizers = r.minimizers();
    ScanOptions so;
    so.threads = s.threads;
    so.spectrum.lanczos.seed = s.seed;
    const auto check = semiclassical_limit_check(pot, mins, lambdas, k, n_max, so);
    out.table_columns = {"lambda", "E1", "target", "difference"};
    out.plot_columns = {"lambda", "difference"};
    Json rows = Json::array();
    for (const auto& row : check.rows) {
        out.table_rows.push_back({fmt(row.lambda), fmt(row.e1), fmt(row.target), fmt(row.difference)});
        out.plot_rows.push_back({fmt(row.lambda), fmt(row.difference)});
        rows.push_back({{"lambda", row.lambda}, {"E1", row.e1}, {"target", row.target}, {"difference", row.difference}});
    }
    out.report["results"] = {{"target", check.target}, {"well_energies", check.well_energies}, {"rows", rows},
                             {"tail_decreasing", check.tail_decreasing}};
}

inline void write_text(const std::filesystem::path& file, const std::string& header, const std::vector<std::string>& columns,
                       const std::vector<std::vector<std::string>>& rows, char sep)
{
    std::ofstream os(file, std::ios::binary);
    if (!os) throw ValidationError("--out-dir: cannot write " + file.string());
    os << header << '\n';
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? std::string(1, sep) : "") << cells[i];
        os << '\n';
    };
    if (sep == ',') line(columns);
    else os << "# " << [&] {
        std::string s;
        for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? " " : "") + columns[i];
        return s;
    }() << '\n';
    for (const auto& r : rows) line(r);
}

struct RunResult {
    int exit_code = ok;
    std::string message;
    std::string config_hash;
};

/// Parses, validates and runs one config; writes the output files on success
/// and on numerical failure. Validation errors write nothing.
inline RunResult run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed_override,
                     std::optional<int> threads_override, std::ostream& log = std::cerr)
{
    RunResult result;
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(config_path);
    } catch (const YAML::BadFile&) {
        return {validation_failure, "config: cannot read '" + config_path + "'", ""};
    } catch (const YAML::Exception& e) {
        return {validation_failure, "config: parse error: " + std::string(e.what()), ""};
    }

    Outputs out;
    Json config;
    Settings settings;
    Model model;
    std::string kind;
    std::string header;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Node root(doc, "");
        root.allow_only({"model", "task", "seed", "threads"});
        settings.seed = static_cast<std::uint64_t>(root.has("seed") ? root.child("seed").integer() : 1);
        if (root.has("seed") && root.child("seed").integer() < 0) root.fail("seed", "must be >= 0");
        settings.threads = root.integer("threads", 1, 1024, 1);
        if (seed_override) settings.seed = *seed_override;
        if (threads_override) {
            if (*threads_override < 1) throw ValidationError("--threads: must be >= 1");
            settings.threads = *threads_override;
        }
        config = to_json(doc);
        config["seed"] = settings.seed;
        config.erase("threads");  // never changes results, so not part of the hash
        result.config_hash = hex(fnv1a(nlohmann::json(config).dump()));
        header = std::string("pphi2 ") + version + " config " + result.config_hash;

        const Node task = root.child("task");
        task.require_map();
        kind = task.text("kind");
        static const std::set<std::string> kinds{"minimize", "harmonic", "agmon", "instanton", "spectrum", "gap-scan", "limit-check"};
        if (!kinds.count(kind))
            task.fail("kind", "expected minimize|harmonic|agmon|instanton|spectrum|gap-scan|limit-check, got '" + kind + "'");
        model = build_model(root);

        out.report["header"] = header;
        out.report["version"] = version;
        out.report["config_hash"] = result.config_hash;
        out.report["seed"] = settings.seed;
        out.report["config"] = config;
        out.report["model"] = model.summary;
        out.report["warnings"] = model.potential->warnings();
        out.report["status"] = "running";

        std::filesystem::create_directories(out_dir);
        try {
            if (kind == "minimize") run_minimize(task, model, settings, out);
            else if (kind == "harmonic") run_harmonic(task, model, settings, out);
            else if (kind == "agmon") run_agmon(task, model, settings, out);
            else if (kind == "instanton") run_instanton(task, model, settings, out);
            else if (kind == "spectrum") run_spectrum(task, model, settings, out);
            else if (kind == "gap-scan") run_gap_scan(task, model, settings, out);
            else run_limit_check(task, model, settings, out);
            out.report["status"] = out.failed ? "not_converged" : "ok";
            result.exit_code = out.failed ? numerical_failure : ok;
            if (out.failed) result.message = kind + ": solver did not converge; results are partial";
        } catch (const NumericalError& e) {
            out.report["status"] = "numerical_failure";
            out.report["error"] = e.what();
            result.exit_code = numerical_failure;
            result.message = e.what();
        }
    } catch (const ValidationError& e) {
        return {validation_failure, e.what(), result.config_hash};
    } catch (const std::filesystem::filesystem_error& e) {
        return {validation_failure, std::string("--out-dir: ") + e.what(), result.config_hash};
    }

    const std::filesystem::path dir(out_dir);
    {
        std::ofstream os(dir / "report.json", std::ios::binary);
        if (!os) return {validation_failure, "--out-dir: cannot write report.json", result.config_hash};
        os << out.report.dump(2) << '\n';
    }
    const std::string comment = "# " + header;
    if (!out.table_columns.empty()) write_text(dir / "table.csv", comment, out.table_columns, out.table_rows, ',');
    if (!out.plot_columns.empty()) write_text(dir / "plot.dat", comment, out.plot_columns, out.plot_rows, ' ');
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << kind << ": " << out.report["status"].get<std::string>() << " in " << fmt(std::round(elapsed * 1000) / 1000) << " s, outputs in "
        << out_dir << '\n';
    return result;
}

// ---------------------------------------------------------------------------
// verify

inline int verify(const std::string& suite, std::uint64_t seed, int threads, std::ostream& os)
{
    verify::Context ctx{seed, threads};
    const auto checks = verify::run_suite(suite, ctx);
    int failed = 0;
    for (const auto& c : checks) {
        char line[512];
        std::snprintf(line, sizeof line, "%s  %-50s  %-14s %-5s %-14s tol %-8s  [%s]", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                      fmt(c.value).c_str(), verify::to_string(c.kind), fmt(c.expected).c_str(), fmt(c.tolerance).c_str(),
                      c.anchor.c_str());
        os << line << '\n';
        failed += c.passed ? 0 : 1;
    }
    os << suite << ": " << checks.size() - failed << "/" << checks.size() << " checks passed\n";
    return failed == 0 ? ok : numerical_failure;
}

} // namespace pphi2::cli
