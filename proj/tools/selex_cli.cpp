// Command-line frontend: synthetic data generation, clustering, hierarchy
// extraction, target/loss inspection, the training loop, scoring, and the
// bound diagnostics. Exit codes: 0 success, 2 validation error, 1 runtime
// error. All randomness is governed by --seed (default: SELEX_SEED, else 0).

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selex/selex.hpp"

namespace {

using selex::json;

std::uint64_t default_seed() {
    const char* env = std::getenv("SELEX_SEED");
    if (!env || !*env) return 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
        throw std::invalid_argument("SELEX_SEED is not an unsigned integer");
    return v;
}

json report_skeleton(const selex::RunConfig& rc, std::uint64_t seed) {
    return json{{"config_echo", selex::resolved_config(rc)}, {"seed", seed}};
}

void emit(const json& report, const std::string& out_path) {
    if (out_path.empty())
        std::cout << report.dump(2) << "\n";
    else
        selex::write_report(out_path, report);
}

// Fills in k and cluster_size from the data when left unset.
selex::BsskConfig finalize_bssk(selex::BsskConfig cfg, const selex::Matrix& e,
                                const selex::LabelInfo& l, std::uint64_t seed) {
    if (cfg.k == 0) cfg.k = l.k_total;
    if (cfg.balanced && !cfg.cluster_size)
        cfg.cluster_size = static_cast<int>(e.rows) / cfg.k;
    cfg.seed = seed;
    return cfg;
}

struct Cli {
    CLI::App app{"SelEx: hierarchical self-expertise clustering toolkit", "selex"};

    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    // shared option storage; only one subcommand parses per invocation
    std::string emb_path, labels_path, out_path, pred_path, grad_out, prefix;
    int k_val = 0, c_val = 0, epochs_val = 0, steps_val = 0;
    double lr_val = 0.0, alpha_val = 0.5;
    bool unbalanced = false, smoothed = false, no_split = false;
    std::string variant = "pseudo_label";
    selex::SyntheticSpec spec;
    double known_fraction = 0.5, labeled_fraction = 0.5;
    std::vector<std::uint64_t> ns, ks;

    CLI::Option *k_opt = nullptr, *c_opt = nullptr, *epochs_opt = nullptr,
                *steps_opt = nullptr, *lr_opt = nullptr, *alpha_opt = nullptr;

    CLI::App *synth, *cluster, *hier, *targets, *loss_cmd, *train_cmd, *eval_cmd,
        *bounds_cmd;

    Cli() {
        app.require_subcommand(1);

        synth = app.add_subcommand("synth", "generate hierarchical synthetic data");
        synth->add_option("--depth", spec.depth, "tree depth (K = 2^depth)");
        synth->add_option("--per-leaf", spec.samples_per_leaf, "samples per leaf");
        synth->add_option("--dims", spec.dims, "embedding dimension");
        synth->add_option("--sigma", spec.noise_sigma, "noise standard deviation");
        synth->add_option("--separation", spec.separation, "tree split offset scale");
        synth->add_option("--known-fraction", known_fraction,
                          "fraction of categories kept known");
        synth->add_option("--labeled-fraction", labeled_fraction,
                          "labeled fraction within known categories");
        synth->add_flag("--no-split", no_split, "keep every category known and labeled");
        synth->add_option("--out", prefix, "output prefix")->required();

        cluster = app.add_subcommand("cluster", "run balanced semi-supervised k-means");
        cluster->add_option("--embeddings", emb_path, ".selx or .csv matrix")->required();
        cluster->add_option("--labels", labels_path, "labels csv")->required();
        k_opt = cluster->add_option("--k", k_val, "cluster count (default: K from labels)");
        c_opt = cluster->add_option("--c", c_val, "cluster size C (default: floor(N/K))");
        cluster->add_flag("--unbalanced", unbalanced, "skip size balancing");
        cluster->add_option("--out", out_path, "report path (default: stdout)");

        hier = app.add_subcommand("hierarchy", "build the pseudo-label hierarchy");
        hier->add_option("--embeddings", emb_path)->required();
        hier->add_option("--labels", labels_path)->required();
        hier->add_option("--k", k_val, "cluster count (default: K from labels)");
        hier->add_flag("--unbalanced", unbalanced, "skip size balancing");
        hier->add_option("--out", out_path, "hierarchy json path")->required();

        targets = app.add_subcommand("targets", "emit the unsupervised target matrix");
        targets->add_option("--embeddings", emb_path)->required();
        targets->add_option("--labels", labels_path)->required();
        targets->add_option("--variant", variant, "pseudo_label or radius")
            ->check(CLI::IsMember({"pseudo_label", "radius"}));
        targets->add_flag("--smoothed", smoothed, "emit Y_hat instead of raw Y");
        alpha_opt = targets->add_option("--alpha", alpha_val, "smoothing alpha");
        targets->add_option("--out", out_path, "matrix path (.csv or .selx)")->required();

        loss_cmd = app.add_subcommand("loss", "evaluate the self-expertise losses");
        loss_cmd->add_option("--embeddings", emb_path)->required();
        loss_cmd->add_option("--labels", labels_path)->required();
        loss_cmd->add_option("--grad-out", grad_out, "also write d l_se / d e");
        loss_cmd->add_option("--out", out_path, "report path (default: stdout)");

        train_cmd = app.add_subcommand("train", "run the alternating optimization loop");
        train_cmd->add_option("--embeddings", emb_path)->required();
        train_cmd->add_option("--labels", labels_path)->required();
        epochs_opt = train_cmd->add_option("--epochs", epochs_val, "epoch count");
        steps_opt = train_cmd->add_option("--steps", steps_val, "gradient steps per epoch");
        lr_opt = train_cmd->add_option("--lr", lr_val, "learning rate");
        train_cmd->add_option("--out-prefix", prefix, "output prefix")->required();

        eval_cmd = app.add_subcommand("eval", "score predictions against labels");
        eval_cmd->add_option("--pred", pred_path, "csv, one cluster id per row")->required();
        eval_cmd->add_option("--labels", labels_path)->required();
        eval_cmd->add_option("--out", out_path, "report path (default: stdout)");

        bounds_cmd = app.add_subcommand("bounds", "print the bound diagnostics table");
        bounds_cmd->add_option("--n", ns, "sample counts")->required()->delimiter(',');
        bounds_cmd->add_option("--k", ks, "category counts")->required()->delimiter(',');

        for (CLI::App* sub : {synth, cluster, hier, targets, loss_cmd, train_cmd,
                              eval_cmd, bounds_cmd}) {
            sub->add_option("--config", config_path, "RunConfig JSON file");
            CLI::Option* s = sub->add_option("--seed", seed, "random seed");
            s->each([this](const std::string&) { seed_opt_used = true; });
        }
    }

    bool seed_opt_used = false;
};

int run(Cli& cli) {
    selex::RunConfig rc =
        cli.config_path.empty() ? selex::RunConfig{} : selex::load_run_config(cli.config_path);
    const std::uint64_t seed = cli.seed_opt_used ? cli.seed : default_seed();

    if (*cli.synth) {
        cli.spec.seed = seed;
        selex::SyntheticData data = selex::generate_synthetic(cli.spec);
        selex::LabelInfo out_labels =
            cli.no_split ? data.labels
                         : selex::make_split(data.labels, cli.known_fraction,
                                             cli.labeled_fraction, selex::mix_seed(seed, 1));
        selex::write_embeddings(cli.prefix + ".selx", data.embeddings);
        selex::write_labels(cli.prefix + ".labels.csv", out_labels);
        json meta = report_skeleton(rc, seed);
        meta["synth"] = {{"depth", cli.spec.depth},
                         {"samples_per_leaf", cli.spec.samples_per_leaf},
                         {"dims", cli.spec.dims},
                         {"separation", cli.spec.separation},
                         {"noise_sigma", cli.spec.noise_sigma},
                         {"known_fraction", cli.no_split ? 1.0 : cli.known_fraction},
                         {"labeled_fraction", cli.no_split ? 1.0 : cli.labeled_fraction},
                         {"n", data.embeddings.rows},
                         {"k_total", out_labels.k_total}};
        selex::write_report(cli.prefix + ".meta.json", meta);
        return 0;
    }

    if (*cli.cluster) {
        selex::Matrix e = selex::read_embeddings(cli.emb_path);
        selex::LabelInfo l = selex::read_labels(cli.labels_path);
        selex::BsskConfig cfg = rc.bssk;
        if (cli.k_opt->count()) cfg.k = cli.k_val;
        if (cli.c_opt->count()) cfg.cluster_size = cli.c_val;
        if (cli.unbalanced) cfg.balanced = false;
        cfg = finalize_bssk(cfg, e, l, seed);
        selex::ClusterModel m = selex::bssk(e, l, cfg);
        selex::RunConfig echo = rc;
        echo.bssk = cfg;
        json rep = report_skeleton(echo, seed);
        rep["assignment"] = m.assignment;
        rep["sizes"] = m.sizes;
        rep["known_cluster_count"] = m.known_cluster_count;
        rep["radii"] = m.radii;
        selex::AccuracyReport acc = selex::gcd_accuracy(m.assignment, l);
        rep["accuracy"] = {{"all", acc.acc_all}};
        if (acc.acc_known) rep["accuracy"]["known"] = *acc.acc_known;
        if (acc.acc_novel) rep["accuracy"]["novel"] = *acc.acc_novel;
        emit(rep, cli.out_path);
        return 0;
    }

    if (*cli.hier) {
        selex::Matrix e = selex::read_embeddings(cli.emb_path);
        selex::LabelInfo l = selex::read_labels(cli.labels_path);
        selex::BsskConfig cfg = rc.bssk;
        if (cli.hier->count("--k")) cfg.k = cli.k_val;
        if (cli.unbalanced) cfg.balanced = false;
        cfg = finalize_bssk(cfg, e, l, seed);
        selex::Hierarchy h = selex::build_hierarchy(e, l, cfg);
        selex::RunConfig echo = rc;
        echo.bssk = cfg;
        selex::write_hierarchy(cli.out_path, h, selex::resolved_config(echo), seed);
        return 0;
    }

    if (*cli.targets) {
        selex::Matrix e = selex::read_embeddings(cli.emb_path);
        selex::LabelInfo l = selex::read_labels(cli.labels_path);
        if (cli.alpha_opt->count()) rc.loss.smoothing.alpha = cli.alpha_val;
        selex::BsskConfig cfg = finalize_bssk(rc.bssk, e, l, seed);
        selex::Hierarchy h = selex::build_hierarchy(e, l, cfg);
        selex::TargetMatrix y =
            cli.variant == "radius"
                ? selex::unsup_target_from_radii(e, h, rc.loss.symmetrize_radius,
                                                 rc.loss.smoothing.normalization)
                : selex::unsup_target_from_hierarchy(h, rc.loss.smoothing.normalization);
        if (cli.smoothed) y = selex::smooth_target(y, rc.loss.smoothing);
        selex::write_embeddings(cli.out_path, y.values);
        return 0;
    }

    if (*cli.loss_cmd) {
        selex::Matrix e = selex::read_embeddings(cli.emb_path);
        selex::LabelInfo l = selex::read_labels(cli.labels_path);
        selex::BsskConfig cfg = finalize_bssk(rc.bssk, e, l, seed);
        selex::Hierarchy h = selex::build_hierarchy(e, l, cfg);
        selex::LossReport lr = cli.grad_out.empty()
                                   ? selex::l_se(e, h, l, rc.loss)
                                   : selex::l_se_with_grad(e, h, l, rc.loss);
        selex::RunConfig echo = rc;
        echo.bssk = cfg;
        json rep = report_skeleton(echo, seed);
        rep["l_use"] = lr.l_use;
        rep["l_sse"] = lr.l_sse;
        rep["l_se"] = lr.l_se;
        rep["l_s_per_level"] = lr.l_s_per_level;
        rep["levels"] = selex::level_counts(h);
        if (!cli.grad_out.empty()) selex::write_embeddings(cli.grad_out, *lr.gradient);
        emit(rep, cli.out_path);
        return 0;
    }

    if (*cli.train_cmd) {
        selex::Matrix e = selex::read_embeddings(cli.emb_path);
        selex::LabelInfo l = selex::read_labels(cli.labels_path);
        selex::RunConfig echo = rc;
        if (cli.epochs_opt->count()) echo.epochs = cli.epochs_val;
        if (cli.steps_opt->count()) echo.steps_per_epoch = cli.steps_val;
        if (cli.lr_opt->count()) echo.learning_rate = cli.lr_val;
        echo.bssk = finalize_bssk(echo.bssk, e, l, seed);
        selex::TrainConfig tc = echo.train_config(seed);
        selex::TrainResult res = selex::run_selex(e, l, tc);
        selex::write_metrics_csv(cli.prefix + ".metrics.csv", res.epochs);
        selex::write_embeddings(cli.prefix + ".final.selx", res.embeddings);
        selex::write_hierarchy(cli.prefix + ".hierarchy.json", res.hierarchy,
                               selex::resolved_config(echo), seed);
        json rep = report_skeleton(echo, seed);
        json epochs = json::array();
        for (const auto& em : res.epochs) {
            json row{{"epoch", em.epoch},     {"l_use", em.l_use},
                     {"l_sse", em.l_sse},     {"l_se", em.l_se},
                     {"acc_all", em.acc_all}, {"backoff_count", em.backoff_count}};
            if (em.acc_known) row["acc_known"] = *em.acc_known;
            if (em.acc_novel) row["acc_novel"] = *em.acc_novel;
            epochs.push_back(row);
        }
        rep["epochs"] = epochs;
        selex::write_report(cli.prefix + ".report.json", rep);
        return 0;
    }

    if (*cli.eval_cmd) {
        selex::LabelInfo l = selex::read_labels(cli.labels_path);
        selex::Matrix pred_m = selex::read_embeddings_csv(cli.pred_path);
        if (pred_m.cols != 1)
            throw std::invalid_argument("eval: predictions must be one id per line");
        std::vector<int> assignment(pred_m.rows);
        for (std::size_t i = 0; i < pred_m.rows; ++i) {
            double v = pred_m.at(i, 0);
            if (v < 0 || v != static_cast<double>(static_cast<int>(v)))
                throw std::invalid_argument("eval: predictions must be nonnegative integers");
            assignment[i] = static_cast<int>(v);
        }
        selex::AccuracyReport acc = selex::gcd_accuracy(assignment, l);
        json rep = report_skeleton(rc, seed);
        rep["accuracy"] = {
            {"all", acc.acc_all},
            {"counts", {{"all", acc.n_all}, {"known", acc.n_known}, {"novel", acc.n_novel}}}};
        if (acc.acc_known) rep["accuracy"]["known"] = *acc.acc_known;
        if (acc.acc_novel) rep["accuracy"]["novel"] = *acc.acc_novel;
        emit(rep, cli.out_path);
        return 0;
    }

    if (*cli.bounds_cmd) {
        std::printf("%10s %6s %16s %16s %16s %14s\n", "n", "k", "s_bound", "u_full",
                    "u_restricted", "k2_residual");
        for (std::uint64_t n : cli.ns)
            for (std::uint64_t k : cli.ks) {
                selex::BoundsInput b{n, k};
                double s = selex::s_bound(b);
                selex::UnsupBounds u = selex::u_bounds(b);
                if (k % 2 == 0)
                    std::printf("%10llu %6llu %16.9f %16.9f %16.9f %14.3e\n",
                                (unsigned long long)n, (unsigned long long)k, s, u.u_full,
                                u.u_restricted, selex::k2_residual(b));
                else
                    std::printf("%10llu %6llu %16.9f %16.9f %16.9f %14s\n",
                                (unsigned long long)n, (unsigned long long)k, s, u.u_full,
                                u.u_restricted, "-");
            }
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    Cli cli;
    try {
        cli.app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << cli.app.help() << "\n";
        return 2;
    }
    try {
        return run(cli);
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
