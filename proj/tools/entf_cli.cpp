// Command-line driver: synthetic scene generation, factorization with the
// plain or extrapolated solvers, metric evaluation, abundance-map export
// and trace comparison. Every run persists the fully resolved configuration
// next to its outputs so it can be replayed.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "entf/extrapolation.hpp"
#include "entf/io.hpp"
#include "entf/metrics.hpp"
#include "entf/solver.hpp"
#include "entf/synth.hpp"
#include "entf/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Method { Entf, EntfRre, EntfTet };

Method parse_method(const std::string& name) {
    if (name == "entf")
        return Method::Entf;
    if (name == "entf-rre")
        return Method::EntfRre;
    if (name == "entf-tet")
        return Method::EntfTet;
    throw entf::ConfigError("factorize: unknown method '" + name +
                            "' (expected entf, entf-rre or entf-tet)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Entf: return "entf";
        case Method::EntfRre: return "entf-rre";
        default: return "entf-tet";
    }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct GenArgs {
    std::size_t bands = 16;
    std::size_t width = 12;
    std::size_t height = 12;
    std::size_t endmembers = 3;
    double snr_db = 40.0;
    std::uint64_t seed = 0;
    std::string endmember_family = "smooth-gaussian-mixture";
    std::string abundance_family = "dirichlet";
    std::string out;
};

int run_gen(const GenArgs& args) {
    entf::SceneParams params;
    params.bands = args.bands;
    params.width = args.width;
    params.height = args.height;
    params.endmembers = args.endmembers;
    params.snr_db = args.snr_db;
    params.seed = args.seed;
    params.endmember_family = entf::parse_endmember_family(args.endmember_family);
    params.abundance_family = entf::parse_abundance_family(args.abundance_family);

    const entf::SyntheticScene scene = entf::make_scene(params);
    const fs::path dir(args.out);
    fs::create_directories(dir);

    entf::write_tensor(dir / "endmembers.tnsr", scene.endmembers);
    entf::write_tensor(dir / "abundances.tnsr", scene.abundances);
    entf::write_tensor(dir / "clean.tnsr", scene.clean);
    entf::write_tensor(dir / "noisy.tnsr", scene.noisy);

    entf::RunConfig resolved;
    resolved.scene = params;
    entf::write_json(dir / "config.json", entf::run_config_to_json(resolved));

    json manifest = {
        {"kind", "gen"},
        {"bands", params.bands},
        {"width", params.width},
        {"height", params.height},
        {"endmembers", params.endmembers},
        {"seed", params.seed},
        {"target_snr_db", args.snr_db},
        {"realized_snr_db", finite_or_null(scene.snr_db)},
        {"files", {"endmembers.tnsr", "abundances.tnsr", "clean.tnsr", "noisy.tnsr"}},
    };
    entf::write_json(dir / "manifest.json", manifest);
    std::cout << "wrote scene to " << dir.string() << " (realized SNR "
              << scene.snr_db << " dB)\n";
    return 0;
}

struct FactorizeArgs {
    std::string input;
    std::string method = "entf";
    std::string config_path;
    std::string out;
    // flag overrides; unset values inherit the config file / defaults
    std::optional<std::size_t> r;
    std::optional<std::string> lambda_s;
    std::optional<double> lambda_x;
    std::optional<double> lambda_y;
    std::optional<std::size_t> rank_x;
    std::optional<std::string> gamma_asc;
    std::optional<double> eps_stop;
    std::optional<std::size_t> max_iter;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> order;
    std::optional<std::string> probe;
};

void apply_scalar_or_auto(const std::optional<std::string>& flag, double& value, bool& auto_flag,
                          const char* name) {
    if (!flag)
        return;
    if (*flag == "auto") {
        auto_flag = true;
        return;
    }
    try {
        value = std::stod(*flag);
        auto_flag = false;
    } catch (const std::exception&) {
        throw entf::ConfigError(std::string("factorize: ") + name + " must be a number or 'auto'");
    }
}

int run_factorize(const FactorizeArgs& args) {
    const Method method = parse_method(args.method);
    const entf::DenseTensor cube = entf::read_tensor(args.input);

    entf::RunConfig cfg;
    if (!args.config_path.empty())
        cfg = entf::read_run_config(args.config_path);

    if (args.r) cfg.entf.r = *args.r;
    apply_scalar_or_auto(args.lambda_s, cfg.entf.lambda_s, cfg.lambda_s_auto, "lambda-s");
    if (args.lambda_x) cfg.entf.lambda_x = *args.lambda_x;
    if (args.lambda_y) cfg.entf.lambda_y = *args.lambda_y;
    if (args.rank_x) cfg.entf.rank_x = *args.rank_x;
    apply_scalar_or_auto(args.gamma_asc, cfg.entf.gamma_asc, cfg.gamma_asc_auto, "gamma");
    if (args.eps_stop) cfg.entf.eps_stop = *args.eps_stop;
    if (args.max_iter) cfg.entf.max_iter = *args.max_iter;
    if (args.seed) cfg.entf.seed = *args.seed;
    if (args.order) cfg.extrap.order = *args.order;
    if (args.probe) cfg.extrap.probe = entf::parse_probe(*args.probe);

    // Resolve "auto" parameters against the input cube before running.
    if (cfg.lambda_s_auto) {
        cfg.entf.lambda_s = entf::compute_lambda_s(cube);
        if (cfg.entf.lambda_s > 0.0 && cfg.entf.lambda_y <= 0.0)
            cfg.entf.lambda_y = 1.0;
        cfg.lambda_s_auto = false;
    }
    if (cfg.gamma_asc_auto) {
        cfg.entf.gamma_asc = entf::auto_gamma_asc(cube);
        cfg.gamma_asc_auto = false;
    }

    const fs::path dir(args.out);
    fs::create_directories(dir);
    cfg.entf.trace_path = (dir / "trace.csv").string();
    entf::write_json(dir / "config.json", entf::run_config_to_json(cfg));

    const auto t0 = std::chrono::steady_clock::now();
    entf::EntfResult result = [&] {
        switch (method) {
            case Method::Entf: return entf::run_entf(cube, cfg.entf);
            case Method::EntfRre: return entf::entf_rre(cube, cfg.entf, cfg.extrap);
            default: return entf::entf_tet(cube, cfg.entf, cfg.extrap);
        }
    }();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    entf::write_tensor(dir / "x.tnsr", result.x);
    entf::write_tensor(dir / "y.tnsr", result.y);

    const double rel_err = entf::frobenius_norm(entf::sub(cube, result.reconstruction)) /
                           entf::frobenius_norm(cube);
    json manifest = {
        {"kind", "factorize"},
        {"method", method_name(method)},
        {"input", args.input},
        {"iterations", result.iterations},
        {"converged", result.converged},
        {"wall_time_s", wall},
        {"reconstruction_rel_error", rel_err},
        {"final_objective",
         result.objective_history.empty() ? json(nullptr) : json(result.objective_history.back())},
        {"files", {"x.tnsr", "y.tnsr", "trace.csv", "config.json"}},
    };
    entf::write_json(dir / "result.json", manifest);
    std::cout << method_name(method) << ": " << result.iterations << " iterations, "
              << (result.converged ? "converged" : "max_iter reached") << ", rel error "
              << rel_err << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string truth_dir;
    std::string est_dir;
    std::string out;
};

int run_evaluate(const EvaluateArgs& args) {
    const fs::path truth(args.truth_dir);
    const fs::path est(args.est_dir);

    const entf::DenseTensor x_true = entf::read_tensor(truth / "endmembers.tnsr");
    const entf::DenseTensor y_true = entf::read_tensor(truth / "abundances.tnsr");
    const entf::DenseTensor cube_true = entf::read_tensor(truth / "clean.tnsr");
    const entf::DenseTensor x_hat = entf::read_tensor(est / "x.tnsr");
    const entf::DenseTensor y_hat = entf::read_tensor(est / "y.tnsr");

    if (!x_true.same_shape(x_hat))
        throw entf::ShapeError("evaluate: endmembers.tnsr and x.tnsr shapes differ (" +
                               entf::detail::shape_str(x_true.shape()) + " vs " +
                               entf::detail::shape_str(x_hat.shape()) + ")");
    if (!y_true.same_shape(y_hat))
        throw entf::ShapeError("evaluate: abundances.tnsr and y.tnsr shapes differ (" +
                               entf::detail::shape_str(y_true.shape()) + " vs " +
                               entf::detail::shape_str(y_hat.shape()) + ")");

    const entf::DenseTensor cube_hat = entf::einstein_product(x_hat, y_hat, 1);
    const entf::UnmixReport report =
        entf::evaluate_unmixing(cube_true, cube_hat, x_true, x_hat, y_true, y_hat);

    const fs::path out_csv(args.out);
    if (out_csv.has_parent_path())
        fs::create_directories(out_csv.parent_path());
    std::ofstream csv(out_csv, std::ios::trunc);
    if (!csv)
        throw entf::IoError("evaluate: cannot open '" + out_csv.string() + "'");
    csv << report.to_csv();
    fs::path out_json = out_csv;
    out_json.replace_extension(".json");
    entf::write_json(out_json, report.to_json());

    std::cout << "mse " << report.mse << ", sam_mean " << report.sam_mean << ", mse_y "
              << report.mse_y << "\n";
    return 0;
}

int run_export_maps(const std::string& abundances, const std::string& out_dir) {
    const entf::DenseTensor y = entf::read_tensor(abundances);
    const auto files = entf::write_abundance_maps(y, out_dir);
    std::cout << "wrote " << files.size() << " maps to " << out_dir << "\n";
    return 0;
}

struct TraceSummary {
    std::size_t iterations = 0;
    double final_objective = 0.0;
    double final_rel_change_x = 0.0;
    double final_rel_change_y = 0.0;
    std::size_t cycles = 0;
    std::size_t accepted_cycles = 0;
};

TraceSummary summarize_trace(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw entf::IoError("trace-compare: cannot open '" + path.string() + "'");
    TraceSummary s;
    std::string line;
    if (!std::getline(in, line) || line != "iter,objective,rel_change_x,rel_change_y")
        throw entf::IoError("trace-compare: '" + path.string() + "' is not a solver trace");
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line.rfind("# cycle,", 0) == 0) {
            ++s.cycles;
            if (line.find(",accepted") != std::string::npos)
                ++s.accepted_cycles;
            continue;
        }
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        s.iterations = std::stoul(field);
        std::getline(row, field, ',');
        s.final_objective = std::stod(field);
        std::getline(row, field, ',');
        s.final_rel_change_x = std::stod(field);
        std::getline(row, field, ',');
        s.final_rel_change_y = std::stod(field);
    }
    return s;
}

int run_trace_compare(const std::string& a_path, const std::string& b_path,
                      const std::string& out) {
    const TraceSummary a = summarize_trace(a_path);
    const TraceSummary b = summarize_trace(b_path);
    json cmp = {
        {"kind", "trace-compare"},
        {"a",
         {{"path", a_path},
          {"iterations", a.iterations},
          {"final_objective", a.final_objective},
          {"cycles", a.cycles},
          {"accepted_cycles", a.accepted_cycles}}},
        {"b",
         {{"path", b_path},
          {"iterations", b.iterations},
          {"final_objective", b.final_objective},
          {"cycles", b.cycles},
          {"accepted_cycles", b.accepted_cycles}}},
        {"fewer_iterations", a.iterations <= b.iterations ? "a" : "b"},
        {"lower_final_objective", a.final_objective <= b.final_objective ? "a" : "b"},
    };
    if (!out.empty()) {
        entf::write_json(out, cmp);
    }
    std::cout << cmp.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonnegative tensor factorization of hyperspectral cubes under the "
                 "Einstein contracted product, with RRE/TET-accelerated solvers"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "Generate a synthetic scene with ground truth");
    cmd_gen->add_option("--bands", gen.bands, "Spectral band count I")->required();
    cmd_gen->add_option("--width", gen.width, "Spatial extent J")->required();
    cmd_gen->add_option("--height", gen.height, "Spatial extent K")->required();
    cmd_gen->add_option("--endmembers", gen.endmembers, "Endmember count r")->required();
    cmd_gen->add_option("--snr", gen.snr_db,
                        "Target SNR in dB (Frobenius energy ratio of the whole cube)")
        ->required();
    cmd_gen->add_option("--seed", gen.seed, "Scene seed");
    cmd_gen->add_option("--endmember-family", gen.endmember_family,
                        "smooth-gaussian-mixture | random-positive");
    cmd_gen->add_option("--abundance-family", gen.abundance_family, "dirichlet | smooth-fields");
    cmd_gen->add_option("--out", gen.out, "Output directory")->required();

    FactorizeArgs fac;
    auto* cmd_fac = app.add_subcommand("factorize", "Factorize a nonnegative cube");
    cmd_fac->add_option("--in", fac.input, "Input cube tensor file")->required();
    cmd_fac->add_option("--method", fac.method, "entf | entf-rre | entf-tet");
    cmd_fac->add_option("--config", fac.config_path, "Run configuration JSON");
    cmd_fac->add_option("--out", fac.out, "Output directory")->required();
    cmd_fac->add_option("--rank", fac.r, "Endmember count r");
    cmd_fac->add_option("--lambda-s", fac.lambda_s, "Sparsity weight, number or 'auto'");
    cmd_fac->add_option("--lambda-x", fac.lambda_x, "Low-rank proximity weight");
    cmd_fac->add_option("--lambda-y", fac.lambda_y, "Sparsity proximity weight");
    cmd_fac->add_option("--rank-x", fac.rank_x, "Estimated rank of x for the q step");
    cmd_fac->add_option("--gamma", fac.gamma_asc, "ASC weight, number or 'auto' (25*max)");
    cmd_fac->add_option("--eps", fac.eps_stop, "Relative-change stopping tolerance");
    cmd_fac->add_option("--max-iter", fac.max_iter, "Iteration cap");
    cmd_fac->add_option("--seed", fac.seed, "Initialization seed");
    cmd_fac->add_option("--order", fac.order, "Extrapolation order k");
    cmd_fac->add_option("--probe", fac.probe, "TET probe: first-difference | random-seeded");

    EvaluateArgs eva;
    auto* cmd_eval = app.add_subcommand("evaluate", "Score an estimate against ground truth");
    cmd_eval->add_option("--truth", eva.truth_dir, "Scene directory from gen")->required();
    cmd_eval->add_option("--est", eva.est_dir, "Factorization directory")->required();
    cmd_eval->add_option("--out", eva.out, "Report CSV path (JSON written alongside)")
        ->required();

    std::string maps_in;
    std::string maps_out;
    auto* cmd_maps = app.add_subcommand("export-maps", "Write abundance slices as PGM images");
    cmd_maps->add_option("--abundances", maps_in, "Abundance tensor file")->required();
    cmd_maps->add_option("--out", maps_out, "Output directory")->required();

    std::string trace_a;
    std::string trace_b;
    std::string trace_out;
    auto* cmd_trace = app.add_subcommand("trace-compare", "Compare two iteration traces");
    cmd_trace->add_option("--a", trace_a, "First trace CSV")->required();
    cmd_trace->add_option("--b", trace_b, "Second trace CSV")->required();
    cmd_trace->add_option("--out", trace_out, "Optional comparison JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(cmd_gen))
            return run_gen(gen);
        if (app.got_subcommand(cmd_fac))
            return run_factorize(fac);
        if (app.got_subcommand(cmd_eval))
            return run_evaluate(eva);
        if (app.got_subcommand(cmd_maps))
            return run_export_maps(maps_in, maps_out);
        if (app.got_subcommand(cmd_trace))
            return run_trace_compare(trace_a, trace_b, trace_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
