#include "escape/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "escape/errors.hpp"
#include "escape/holes.hpp"
#include "escape/montecarlo.hpp"
#include "escape/renewal.hpp"
#include "escape/ulam.hpp"

namespace escape {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok) {
            std::string list;
            for (const char* a : allowed)
                list += std::string(list.empty() ? "" : ", ") + a;
            throw ConfigError(where + ": unknown key '" + key + "' (allowed: " + list + ")");
        }
    }
}

double get_number(const json& j, const char* key, const std::string& where, double def)
{
    if (!j.contains(key))
        return def;
    if (!j[key].is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return j[key].get<double>();
}

std::int64_t get_int(const json& j, const char* key, const std::string& where, std::int64_t def)
{
    if (!j.contains(key))
        return def;
    const json& v = j[key];
    if (v.is_number_integer())
        return v.get<std::int64_t>();
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
        std::abs(v.get<double>()) < 9e15)
        return static_cast<std::int64_t>(v.get<double>());
    throw ConfigError(where + "." + key + ": expected an integer");
}

void require(bool cond, const std::string& msg)
{
    if (!cond)
        throw ConfigError(msg);
}

MapSpec parse_map(const json& j)
{
    require(j.is_object() && j.contains("family") && j["family"].is_string(),
            "map: expected an object with a string 'family' (lsv, farey, intermittent, doubling)");
    const std::string fam = j["family"].get<std::string>();
    MapSpec s;
    if (fam == "lsv") {
        check_keys(j, "map", {"family", "alpha"});
        s.family = Family::Lsv;
        s.alpha = get_number(j, "alpha", "map", s.alpha);
    } else if (fam == "farey") {
        check_keys(j, "map", {"family", "theta", "levels"});
        s.family = Family::Farey;
        s.theta = get_number(j, "theta", "map", s.theta);
        s.levels = static_cast<int>(get_int(j, "levels", "map", s.levels));
    } else if (fam == "intermittent") {
        check_keys(j, "map", {"family", "l1", "k2"});
        s.family = Family::Intermittent;
        s.l1 = get_number(j, "l1", "map", s.l1);
        s.k2 = get_number(j, "k2", "map", s.k2);
    } else if (fam == "doubling") {
        check_keys(j, "map", {"family"});
        s.family = Family::Doubling;
    } else {
        throw ConfigError("map.family: unknown family '" + fam +
                          "' (expected lsv, farey, intermittent or doubling)");
    }
    try {
        (void)PiecewiseMap::from_spec(s);
    } catch (const Error& e) {
        throw ConfigError(std::string("map: ") + e.what());
    }
    return s;
}

json map_json(const MapSpec& s)
{
    switch (s.family) {
    case Family::Lsv: return {{"family", "lsv"}, {"alpha", s.alpha}};
    case Family::Farey: return {{"family", "farey"}, {"theta", s.theta}, {"levels", s.levels}};
    case Family::Intermittent: return {{"family", "intermittent"}, {"l1", s.l1}, {"k2", s.k2}};
    case Family::Doubling: return {{"family", "doubling"}};
    }
    return nullptr;
}

const char* side_name(IntermittentSide s)
{
    switch (s) {
    case IntermittentSide::Minus: return "minus";
    case IntermittentSide::Plus: return "plus";
    case IntermittentSide::Both: return "both";
    }
    return "both";
}

BaseSpec parse_base(const json& j, Family fam)
{
    BaseSpec b;
    if (j.is_string()) {
        require(j.get<std::string>() == "auto", "base: expected \"auto\" or an object");
        return b;
    }
    if (fam == Family::Intermittent) {
        check_keys(j, "base", {"side", "n"});
        require(j.contains("side") && j["side"].is_string(),
                "base.side: expected \"minus\", \"plus\" or \"both\"");
        const std::string side = j["side"].get<std::string>();
        if (side == "minus")
            b.side = IntermittentSide::Minus;
        else if (side == "plus")
            b.side = IntermittentSide::Plus;
        else if (side == "both")
            b.side = IntermittentSide::Both;
        else
            throw ConfigError("base.side: expected \"minus\", \"plus\" or \"both\"");
        b.kind = BaseSpec::Kind::Intermittent;
        b.n = static_cast<int>(get_int(j, "n", "base", 0));
        require(b.n >= 0, "base.n: must be non-negative");
        return b;
    }
    require(fam == Family::Lsv || fam == Family::Farey,
            "base: the doubling map only supports \"auto\" (the whole circle)");
    check_keys(j, "base", {"m"});
    require(j.contains("m"), "base.m: missing");
    b.kind = BaseSpec::Kind::Level;
    b.m = static_cast<int>(get_int(j, "m", "base", 2));
    require(b.m >= (fam == Family::Farey ? 2 : 1),
            fam == Family::Farey ? "base.m: Farey bases need m >= 2" : "base.m: must be >= 1");
    return b;
}

json base_json(const BaseSpec& b)
{
    switch (b.kind) {
    case BaseSpec::Kind::Auto: return "auto";
    case BaseSpec::Kind::Level: return {{"m", b.m}};
    case BaseSpec::Kind::Intermittent: return {{"side", side_name(b.side)}, {"n", b.n}};
    }
    return "auto";
}

bool valid_name(const std::string& s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
}

HoleSpec parse_hole(const json& j, std::size_t index)
{
    const std::string where = "holes[" + std::to_string(index) + "]";
    check_keys(j, where, {"name", "empty", "center", "width", "mu"});
    HoleSpec h;
    h.name = "H" + std::to_string(index + 1);
    if (j.contains("name")) {
        require(j["name"].is_string() && valid_name(j["name"].get<std::string>()),
                where + ".name: expected letters, digits, '-' or '_'");
        h.name = j["name"].get<std::string>();
    }
    if (j.contains("empty")) {
        require(j["empty"].is_boolean(), where + ".empty: expected true or false");
        h.empty = j["empty"].get<bool>();
    }
    if (h.empty) {
        require(!j.contains("center") && !j.contains("width") && !j.contains("mu"),
                where + ": an empty hole takes no center, width or mu");
        return h;
    }
    require(j.contains("center"), where + ".center: missing");
    h.center = get_number(j, "center", where, 0.0);
    require(j.contains("width") != j.contains("mu"),
            where + ": give exactly one of 'width' (full width) or 'mu' (target mu_X measure)");
    if (j.contains("width")) {
        h.width = get_number(j, "width", where, 0.0);
        require(*h.width > 0.0, where + ".width: must be positive");
    } else {
        h.mu = get_number(j, "mu", where, 0.0);
        require(*h.mu > 0.0 && *h.mu < 1.0, where + ".mu: must lie in (0, 1)");
    }
    return h;
}

json hole_json(const HoleSpec& h)
{
    json j = {{"name", h.name}};
    if (h.empty) {
        j["empty"] = true;
        return j;
    }
    j["center"] = h.center;
    if (h.width)
        j["width"] = *h.width;
    if (h.mu)
        j["mu"] = *h.mu;
    return j;
}

void write_json(const fs::path& p, const json& j, RunResult& res)
{
    std::ofstream os(p);
    if (!os)
        throw Error("cannot write " + p.string());
    os << j.dump(2) << '\n';
    res.files.push_back(p);
}

template <class F>
void write_file(const fs::path& p, RunResult& res, F body)
{
    std::ofstream os(p);
    if (!os)
        throw Error("cannot write " + p.string());
    body(os);
    res.files.push_back(p);
}

json nullable(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

// Map, base, induced system and the induced invariant density on the base.
struct Setup {
    explicit Setup(const ExperimentConfig& cfg)
        : map(PiecewiseMap::from_spec(cfg.map)),
          sys(map, resolve_base(cfg, map), std::max(100000, cfg.tail_horizon))
    {
        const Interval& b = sys.base();
        InducedUlamOptions o;
        o.subsamples = cfg.induced_subsamples;
        o.cap = cfg.induced_cap;
        const auto op = build_ulam_induced(sys, uniform_edges(b.lo, b.hi, cfg.induced_cells), o);
        density = to_density(op, invariant_density(op));
    }

    PiecewiseMap map;
    InducedSystem sys;
    GridDensity density;
};

TailSequence tail_of(const Setup& s, const ExperimentConfig& cfg)
{
    TailOptions o;
    o.scan_cells = cfg.tail_scan_cells;
    o.extrapolate = true;
    return tail_measure(s.sys, std::max(cfg.tail_horizon, cfg.horizon), s.density, o);
}

json interval_json(const Interval& b)
{
    return {{"lo", b.lo}, {"hi", b.hi}, {"lo_closed", b.lo_closed}, {"hi_closed", b.hi_closed}};
}

} // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const
{
    return to_json(*this) == to_json(o);
}

ExperimentConfig parse_config(const json& j)
{
    check_keys(j, "config",
               {"map", "base", "holes", "horizon", "engines", "mc", "ulam", "induced", "tail",
                "admissibility", "output"});
    ExperimentConfig c;
    require(j.contains("map"), "config.map: missing (e.g. {\"family\":\"lsv\",\"alpha\":0.5})");
    c.map = parse_map(j["map"]);
    if (j.contains("base"))
        c.base = parse_base(j["base"], c.map.family);

    require(j.contains("holes") && j["holes"].is_array() && !j["holes"].empty(),
            "config.holes: expected a non-empty array of holes");
    std::set<std::string> names;
    for (std::size_t i = 0; i < j["holes"].size(); ++i) {
        c.holes.push_back(parse_hole(j["holes"][i], i));
        require(names.insert(c.holes.back().name).second,
                "holes[" + std::to_string(i) + "].name: duplicate name '" + c.holes.back().name + "'");
    }

    c.horizon = static_cast<int>(get_int(j, "horizon", "config", c.horizon));
    require(c.horizon >= 1 && c.horizon <= kMaxMcHorizon, "config.horizon: must lie in [1, 1e6]");

    if (j.contains("engines")) {
        const json& e = j["engines"];
        require(e.is_array() && !e.empty(),
                "config.engines: expected a non-empty array drawn from mc, ulam, predict");
        c.run_mc = c.run_ulam = c.run_predict = false;
        for (const auto& x : e) {
            require(x.is_string(), "config.engines: entries must be strings");
            const std::string s = x.get<std::string>();
            bool* flag = s == "mc" ? &c.run_mc : s == "ulam" ? &c.run_ulam
                                            : s == "predict" ? &c.run_predict : nullptr;
            require(flag != nullptr,
                    "config.engines: unknown engine '" + s + "' (expected mc, ulam, predict)");
            require(!*flag, "config.engines: engine '" + s + "' listed twice");
            *flag = true;
        }
    }

    if (j.contains("mc")) {
        const json& m = j["mc"];
        check_keys(m, "mc", {"samples", "seed", "burn_in"});
        c.mc_samples = get_int(m, "samples", "mc", c.mc_samples);
        require(c.mc_samples >= 1, "mc.samples: must be at least 1");
        if (m.contains("seed")) {
            require(m["seed"].is_number_unsigned() ||
                        (m["seed"].is_number_integer() && m["seed"].get<std::int64_t>() >= 0),
                    "mc.seed: expected a non-negative integer");
            c.mc_seed = m["seed"].get<std::uint64_t>();
        }
        c.mc_burn_in = get_int(m, "burn_in", "mc", c.mc_burn_in);
        require(c.mc_burn_in >= 0, "mc.burn_in: must be non-negative");
    }
    if (j.contains("ulam")) {
        const json& u = j["ulam"];
        check_keys(u, "ulam", {"cells", "ratio", "min_cell"});
        c.ulam_cells = static_cast<int>(get_int(u, "cells", "ulam", c.ulam_cells));
        c.ulam_ratio = get_number(u, "ratio", "ulam", c.ulam_ratio);
        c.ulam_min_cell = get_number(u, "min_cell", "ulam", c.ulam_min_cell);
        require(c.ulam_cells >= 1 && c.ulam_cells <= 10000000, "ulam.cells: must lie in [1, 1e7]");
        require(c.ulam_ratio > 1.0, "ulam.ratio: must exceed 1");
        require(c.ulam_min_cell > 0.0, "ulam.min_cell: must be positive");
    }
    if (j.contains("induced")) {
        const json& u = j["induced"];
        check_keys(u, "induced", {"cells", "subsamples", "cap"});
        c.induced_cells = static_cast<int>(get_int(u, "cells", "induced", c.induced_cells));
        c.induced_subsamples =
            static_cast<int>(get_int(u, "subsamples", "induced", c.induced_subsamples));
        c.induced_cap = static_cast<int>(get_int(u, "cap", "induced", c.induced_cap));
        require(c.induced_cells >= 1, "induced.cells: must be at least 1");
        require(c.induced_subsamples >= 1, "induced.subsamples: must be at least 1");
        require(c.induced_cap >= 1, "induced.cap: must be at least 1");
    }
    if (j.contains("tail")) {
        const json& t = j["tail"];
        check_keys(t, "tail", {"horizon", "scan_cells"});
        c.tail_horizon = static_cast<int>(get_int(t, "horizon", "tail", c.tail_horizon));
        c.tail_scan_cells = static_cast<int>(get_int(t, "scan_cells", "tail", c.tail_scan_cells));
        require(c.tail_horizon >= 1 && c.tail_horizon <= 1000000,
                "tail.horizon: must lie in [1, 1e6]");
        require(c.tail_scan_cells >= 1, "tail.scan_cells: must be at least 1");
    }
    if (j.contains("admissibility")) {
        const json& a = j["admissibility"];
        check_keys(a, "admissibility", {"sigma", "depth", "required"});
        c.sigma = get_number(a, "sigma", "admissibility", c.sigma);
        c.admissibility_depth =
            static_cast<int>(get_int(a, "depth", "admissibility", c.admissibility_depth));
        if (a.contains("required")) {
            require(a["required"].is_boolean(), "admissibility.required: expected true or false");
            c.require_admissible = a["required"].get<bool>();
        }
        require(c.sigma > 0.0 && c.sigma <= 1.0, "admissibility.sigma: must lie in (0, 1]");
        require(c.admissibility_depth >= 0, "admissibility.depth: must be non-negative");
    }
    if (j.contains("output")) {
        require(j["output"].is_string() && !j["output"].get<std::string>().empty(),
                "config.output: expected a directory name");
        c.output = j["output"].get<std::string>();
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c)
{
    json engines = json::array();
    if (c.run_mc)
        engines.push_back("mc");
    if (c.run_ulam)
        engines.push_back("ulam");
    if (c.run_predict)
        engines.push_back("predict");
    json holes = json::array();
    for (const auto& h : c.holes)
        holes.push_back(hole_json(h));
    return {{"map", map_json(c.map)},
            {"base", base_json(c.base)},
            {"holes", holes},
            {"horizon", c.horizon},
            {"engines", engines},
            {"mc", {{"samples", c.mc_samples}, {"seed", c.mc_seed}, {"burn_in", c.mc_burn_in}}},
            {"ulam",
             {{"cells", c.ulam_cells}, {"ratio", c.ulam_ratio}, {"min_cell", c.ulam_min_cell}}},
            {"induced",
             {{"cells", c.induced_cells},
              {"subsamples", c.induced_subsamples},
              {"cap", c.induced_cap}}},
            {"tail", {{"horizon", c.tail_horizon}, {"scan_cells", c.tail_scan_cells}}},
            {"admissibility",
             {{"sigma", c.sigma},
              {"depth", c.admissibility_depth},
              {"required", c.require_admissible}}},
            {"output", c.output}};
}

Interval resolve_base(const ExperimentConfig& cfg, const PiecewiseMap& map)
{
    try {
        switch (cfg.base.kind) {
        case BaseSpec::Kind::Level:
            return map.family() == Family::Farey ? farey_base(map, cfg.base.m)
                                                 : lsv_base(map, cfg.base.m);
        case BaseSpec::Kind::Intermittent:
            return intermittent_base(map, cfg.base.side, cfg.base.n);
        case BaseSpec::Kind::Auto: break;
        }
        double lo = map.phase().hi, hi = map.phase().lo;
        for (const auto& h : cfg.holes) {
            if (h.empty)
                continue;
            const double r = h.width ? 0.5 * *h.width : 0.0;
            lo = std::min(lo, h.center - r);
            hi = std::max(hi, h.center + r);
        }
        if (lo > hi)
            return map.family() == Family::Doubling ? map.phase() : auto_base(map, 0.5, 0.5);
        return auto_base(map, lo, hi);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("base: ") + e.what());
    }
}

TailSequence config_tail(const ExperimentConfig& cfg)
{
    const Setup s(cfg);
    return tail_of(s, cfg);
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out)
{
    RunResult res;
    fs::create_directories(out);
    write_json(out / "config.json", to_json(cfg), res);

    const Setup setup(cfg);
    const PiecewiseMap& map = setup.map;
    const InducedSystem& sys = setup.sys;
    json& summary = res.summary;
    summary["map"] = map_json(cfg.map);
    summary["base"] = interval_json(sys.base());
    summary["seed"] = cfg.mc_seed;

    // holes and admissibility
    AdmissibilityOptions aopt;
    aopt.sigma = cfg.sigma;
    aopt.depth = cfg.admissibility_depth;
    const std::size_t H = cfg.holes.size();
    std::vector<Hole> holes(H, Hole::empty());
    std::vector<HoleReport> reports(H);
    json hole_docs = json::array();
    bool all_ok = true;
    for (std::size_t i = 0; i < H; ++i) {
        const HoleSpec& spec = cfg.holes[i];
        HoleReport& rep = reports[i];
        if (spec.empty) {
            rep.admissible = true;
            rep.failures.clear();
        } else {
            try {
                holes[i] = spec.width
                               ? make_hole(sys, spec.center, 0.5 * *spec.width, setup.density)
                               : hole_with_measure(sys, spec.center, *spec.mu, setup.density);
                rep = check_admissible(sys, holes[i], aopt);
            } catch (const Error& e) {
                rep.admissible = false;
                rep.failures.push_back(e.what());
            }
        }
        all_ok = all_ok && rep.admissible;
        hole_docs.push_back({{"name", spec.name}, {"hole", to_json(holes[i])}, {"report", to_json(rep)}});
    }
    write_json(out / "holes.json", hole_docs, res);
    summary["holes"] = hole_docs;
    if (!all_ok && cfg.require_admissible) {
        res.exit_code = kExitInadmissible;
        summary["error"] = "inadmissible hole(s); see holes.json";
        write_json(out / "summary.json", summary, res);
        return res;
    }

    std::vector<std::string> names;
    for (const auto& h : cfg.holes)
        names.push_back(h.name);
    std::vector<EscapeCurve> mc_curves, ulam_curves;

    if (cfg.run_mc) {
        const auto pts = sample_srb_points(map, cfg.mc_samples, cfg.mc_burn_in, cfg.mc_seed);
        const auto counts = hit_counts(map, holes, pts.points, cfg.horizon);
        for (std::size_t i = 0; i < H; ++i) {
            mc_curves.push_back(to_curve(counts[i], cfg.mc_seed));
            write_file(out / ("mc_" + names[i] + ".csv"), res,
                       [&](std::ostream& os) { write_csv(os, mc_curves.back()); });
        }
        summary["mc"] = {{"samples", cfg.mc_samples},
                         {"seed", cfg.mc_seed},
                         {"burn_in", has_exact_sampler(map) ? 0 : cfg.mc_burn_in},
                         {"exact_sampler", has_exact_sampler(map)},
                         {"boundary_nudges",
                          pts.perturbed + (counts.empty() ? 0 : counts.front().perturbed)}};
    }

    if (cfg.run_ulam) {
        GradingSpec g{cfg.ulam_ratio, cfg.ulam_min_cell, {}, {}};
        for (const auto& h : holes)
            if (!h.none && h.lo() > map.phase().lo && h.hi() < map.phase().hi) {
                g.aligned.push_back(h.lo());
                g.aligned.push_back(h.hi());
            }
        const auto closed = build_ulam(map, cfg.ulam_cells, g);
        const auto stat = invariant_density(closed);
        const GridDensity h = to_density(closed, stat);
        const auto mass = cell_masses(closed, h);
        json per_hole = json::array();
        for (std::size_t i = 0; i < H; ++i) {
            UlamOperator open;
            try {
                open = open_ulam(closed, holes[i], HoleConvention::Arrival, &h);
            } catch (const SnapTooCoarse& e) {
                throw ConfigError("ulam: hole '" + names[i] + "': " + e.what() +
                                  "; increase ulam.cells");
            }
            ulam_curves.push_back(escape_curve_ulam(open, mass, cfg.horizon));
            write_file(out / ("ulam_" + names[i] + ".csv"), res,
                       [&](std::ostream& os) { write_csv(os, ulam_curves.back()); });
            json e = {{"name", names[i]}, {"snap_error", open.snap_error()}};
            try {
                const auto lead = leading_eigenvalue(open);
                e["lambda"] = lead.lambda;
                e["residual"] = lead.residual;
            } catch (const NoConvergence& err) {
                e["lambda"] = nullptr;
                e["error"] = err.what();
            }
            per_hole.push_back(e);
        }
        summary["ulam"] = {{"cells", closed.cells()},
                           {"nonzeros", closed.nonzeros()},
                           {"density_residual", stat.residual},
                           {"holes", per_hole}};
    }

    if (cfg.run_predict) {
        const TailSequence tail = tail_of(setup, cfg);
        write_file(out / "tail.csv", res, [&](std::ostream& os) { write_csv(os, tail); });
        const double mu_D = mu_Delta_of_X(tail);
        const int k = tail.k;
        const int N = cfg.horizon;
        const auto b = compute_b_batch(tail, k, N);
        const TrendFit trend = classify_b_trend(b, k, std::max<long>(k + 1, N / 10), N);

        json preds = json::array();
        std::vector<HoleContext> ctx(H);
        for (std::size_t i = 0; i < H; ++i) {
            ctx[i] = {names[i], reports[i].c_H, holes[i].mu, reports[i].admissible};
            if (holes[i].none || !reports[i].admissible)
                continue;
            const auto curve = predict_curve(tail, k, reports[i].c_H, holes[i].mu, mu_D, N);
            write_file(out / ("prediction_" + names[i] + ".csv"), res, [&](std::ostream& os) {
                os << "# mu_Delta_X=" << mu_D << " c_H=" << reports[i].c_H
                   << " mu_H=" << holes[i].mu << " (survival and pmf relative to mu_Delta(X))\n";
                os << "n,first_order,b_n,second_order,survival_pred,pmf_pred\n";
                os.precision(17);
                for (const auto& p : curve)
                    os << p.n << ',' << p.first_order << ',' << p.b_n << ',' << p.second_order
                       << ',' << p.survival << ',' << p.pmf << '\n';
            });
            preds.push_back({{"name", names[i]},
                             {"c_H", reports[i].c_H},
                             {"mu_H", holes[i].mu},
                             {"monotone_from", monotone_threshold(curve)}});
        }

        json comparisons = json::array();
        for (std::size_t a = 0; a < H; ++a)
            for (std::size_t c = a + 1; c < H; ++c) {
                if (holes[a].none || holes[c].none)
                    continue;
                json entry;
                try {
                    const Verdict v = compare_holes(ctx[a], ctx[c], trend);
                    entry = to_json(v, ctx[a], ctx[c]);
                    entry["pmf_flip"] = v.survival_larger != Order::Indistinguishable &&
                                        v.pmf_larger != Order::Indistinguishable &&
                                        v.survival_larger != v.pmf_larger;
                } catch (const Error& e) {
                    entry = {{"holes", {names[a], names[c]}}, {"error", e.what()}};
                }
                auto late = [&](const std::vector<EscapeCurve>& cs) -> json {
                    if (cs.empty())
                        return nullptr;
                    const double s1 = cs[a].survival[N], s2 = cs[c].survival[N];
                    const double se = std::hypot(cs[a].std_error[N], cs[c].std_error[N]);
                    return {{"n", N},
                            {"survival", {s1, s2}},
                            {"difference", s1 - s2},
                            {"std_error", se},
                            {"survival_larger",
                             s1 > s2 ? names[a] : s2 > s1 ? names[c] : "indistinguishable"}};
                };
                entry["measured_mc"] = late(mc_curves);
                entry["measured_ulam"] = late(ulam_curves);
                comparisons.push_back(entry);
            }

        json verdict = {{"mu_Delta_X", mu_D},
                        {"tail",
                         {{"k", k},
                          {"beta", tail.beta},
                          {"source", to_string(tail.source)},
                          {"horizon", tail.horizon()},
                          {"truncation_mass", tail.truncation_mass}}},
                        {"b_trend",
                         {{"trend", to_string(trend.trend)},
                          {"eta", nullable(trend.eta)},
                          {"window", {trend.from, trend.to}}}},
                        {"predictions", preds},
                        {"comparisons", comparisons},
                        {"badges", prediction_badges()},
                        {"seed", cfg.mc_seed}};
        write_json(out / "verdict.json", verdict, res);
        summary["predict"] = {{"mu_Delta_X", mu_D}, {"k", k}, {"beta", tail.beta}};
        summary["verdict"] = verdict;
    }

    write_json(out / "summary.json", summary, res);
    return res;
}

} // namespace escape
