#include <CLI11.hpp>
#include <iostream>

#include "gbm/cli.hpp"

namespace {

void add_common(CLI::App* cmd, gbm::RunConfig& cfg) {
    cmd->add_option("--metric", cfg.metric_path, "metric definition file")->required();
    cmd->add_option("--quad-nodes", cfg.quad_nodes, "quadrature resolution (0: default)");
    cmd->add_option("--tol-contact", cfg.tol_contact, "contact tolerance");
    cmd->add_option("--tol-res", cfg.tol_res, "relative residual tolerance");
    cmd->add_option("--seed", cfg.seed, "seed for the random direction pools");
    cmd->add_option("--out", cfg.out_path, "JSON output path (default stdout)");
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const gbm::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return gbm::exit_usage;
    } catch (const gbm::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return gbm::exit_io;
    } catch (const gbm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gbm::exit_input;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized Berwald test for Finsler metrics"};
    app.require_subcommand(1);
    gbm::RunConfig cfg;

    auto* decide = app.add_subcommand("decide", "classify a metric on a grid");
    add_common(decide, cfg);
    decide->add_option("--grid", cfg.grid_spec, "box and resolution, e.g. 0:1,0:1@5");
    decide->add_option("--csv", cfg.csv_path, "CSV torsion field output path");
    decide->add_option("--selection-dirs", cfg.selection_dirs, "deterministic selection directions (0: default)");
    decide->add_option("--random-dirs", cfg.random_batch, "random selection directions per pool");
    decide->add_option("--validation-dirs", cfg.validation_dirs, "held-out validation directions");
    decide->add_option("--not-gb-trigger", cfg.not_gb_trigger, "witness residual that rejects a point");
    decide->add_option("--threads", cfg.threads, "worker threads (0: hardware)");
    decide->add_flag("!--no-transport", cfg.transport_check, "skip the parallel-transport check");

    auto* average = app.add_subcommand("average", "emit the averaged metric field");
    add_common(average, cfg);
    average->add_option("--grid", cfg.grid_spec, "box and resolution");

    std::string point;
    auto* torsion = app.add_subcommand("torsion", "single-point extremal torsion with the chain trace");
    add_common(torsion, cfg);
    torsion->add_option("--point", point, "chart point, e.g. 0.5,0.5")->required();

    std::string polyline;
    std::vector<std::string> v0;
    int steps = 1000;
    auto* validate = app.add_subcommand("validate", "transport drift along a polyline");
    add_common(validate, cfg);
    validate->add_option("--polyline", polyline, "vertices, e.g. 0,0;1,0;1,1")->required();
    validate->add_option("--v0", v0, "initial vector(s), e.g. 1,0")->required();
    validate->add_option("--steps", steps, "RK4 steps per unit length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : gbm::exit_usage;
    }

    if (*decide) return gbm::run(cfg);

    return guarded([&] {
        cfg.validate();
        const gbm::MetricFamily family = gbm::load_metric(cfg.metric_path);
        gbm::DecideOptions opts = cfg.decide_options();
        gbm::Json out;
        if (*average) {
            const gbm::Grid grid = gbm::parse_grid(cfg.grid_spec);
            if (grid.dim() != gbm::family_dim(family)) throw gbm::UsageError("grid dimension does not match the metric");
            out = gbm::average_json(family, grid, cfg.quad_nodes);
        } else if (*torsion) {
            const gbm::Vec x = gbm::parse_vector(point, "point");
            if (x.size() != gbm::family_dim(family)) throw gbm::UsageError("point dimension does not match the metric");
            out = gbm::torsion_json(family, x, opts);
        } else {
            if (steps < 1) throw gbm::UsageError("--steps must be positive");
            opts.transport_steps_per_unit = steps;
            std::vector<gbm::Vec> starts;
            for (const auto& s : v0) starts.push_back(gbm::parse_vector(s, "v0"));
            out = gbm::validate_json(family, gbm::parse_polyline(polyline), starts, opts);
        }
        gbm::write_text_file(cfg.out_path, out.dump(2) + "\n");
        return static_cast<int>(gbm::exit_ok);
    });
}
