#include "redteam/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include "redteam/audit.hpp"
#include "redteam/campaign.hpp"
#include "redteam/config.hpp"
#include "redteam/errors.hpp"
#include "redteam/mutation.hpp"
#include "redteam/targets.hpp"
#include "redteam/trainpipe.hpp"

namespace redteam::cli {
namespace fs = std::filesystem;

namespace {

int code(ExitCode c) { return static_cast<int>(c); }

// Maps library failures onto stable exit codes.
int report_failure(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const AuditCorrupt*>(&e)) return code(ExitCode::AuditCorrupt);
    if (dynamic_cast<const TargetUnreachable*>(&e)) return code(ExitCode::TargetUnreachable);
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const PreconditionError*>(&e))
        return code(ExitCode::UsageOrConfig);
    return code(ExitCode::Internal);
}

bool require_campaign(const fs::path& dir, std::ostream& err) {
    if (fs::is_directory(dir) && fs::exists(dir / "events.jsonl")) return true;
    err << "error: " << dir.string() << " is not a campaign directory\n";
    return false;
}

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> episodes;
    std::string out;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    CampaignConfig cfg;
    try {
        json overrides = json::object();
        if (a.seed) overrides["seed"] = *a.seed;
        if (a.episodes) overrides["episodes"] = *a.episodes;
        if (!a.out.empty()) overrides["output_dir"] = a.out;
        cfg = load_config(a.config, overrides);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return code(ExitCode::UsageOrConfig);
    }
    try {
        const auto summary = campaign::run_campaign(cfg, fs::path(cfg.output_dir));
        out << "rounds=" << summary.rounds << " discoveries=" << summary.discoveries
            << " final_asr=" << json(summary.final_asr).dump() << " episodes=" << summary.episodes_used
            << " dir=" << cfg.output_dir << '\n';
        return code(ExitCode::Ok);
    } catch (const std::exception& e) {
        return report_failure(e, err);
    }
}

int cmd_report(const fs::path& dir, const std::string& format, std::ostream& out, std::ostream& err) {
    if (format != "md" && format != "json") {
        err << "error: unknown report format '" << format << "' (expected md or json)\n";
        return code(ExitCode::UsageOrConfig);
    }
    if (!require_campaign(dir, err)) return code(ExitCode::UsageOrConfig);
    try {
        const auto path = audit::generate_report(
            dir, format == "md" ? audit::ReportFormat::Markdown : audit::ReportFormat::Structured);
        out << path.string() << '\n';
        return code(ExitCode::Ok);
    } catch (const std::exception& e) {
        return report_failure(e, err);
    }
}

int cmd_verify(const fs::path& dir, std::ostream& out, std::ostream& err) {
    if (!require_campaign(dir, err)) return code(ExitCode::UsageOrConfig);
    try {
        const auto v = audit::verify_log(dir / "events.jsonl");
        if (!v.ok) {
            out << "corrupt seq=" << v.corrupt_seq << '\n';
            return code(ExitCode::AuditCorrupt);
        }
        out << "ok events=" << v.events << '\n';
        return code(ExitCode::Ok);
    } catch (const std::exception& e) {
        return report_failure(e, err);
    }
}

int cmd_metrics(const fs::path& dir, std::ostream& out, std::ostream& err) {
    if (!require_campaign(dir, err)) return code(ExitCode::UsageOrConfig);
    try {
        const auto summary = audit::build_report_summary(audit::read_events(dir / "events.jsonl"));
        json snapshot = summary.at("metrics");
        snapshot["totals"] = summary.at("totals");
        snapshot["config_hash"] = summary.at("config_hash");
        out << canonical_dump(snapshot) << '\n';
        return code(ExitCode::Ok);
    } catch (const std::exception& e) {
        return report_failure(e, err);
    }
}

struct ExportArgs {
    std::string campaign;
    std::string out;
    std::size_t tiers = 3;
    double negatives_ratio = 1.0;
};

int cmd_export(const ExportArgs& a, std::ostream& out, std::ostream& err) {
    if (!require_campaign(a.campaign, err)) return code(ExitCode::UsageOrConfig);
    if (a.tiers == 0 || !(a.negatives_ratio >= 0.0)) {
        err << "error: --tiers must be >= 1 and --negatives-ratio >= 0\n";
        return code(ExitCode::UsageOrConfig);
    }
    try {
        audit::read_events(fs::path(a.campaign) / "events.jsonl");
        const auto records = campaign::load_vulns(a.campaign);
        if (records.empty()) {
            err << "error: campaign has no vulnerability records; nothing to export\n";
            return code(ExitCode::UsageOrConfig);
        }
        const auto cfg = campaign::load_campaign_config(a.campaign);
        std::vector<std::string> benign;
        if (!cfg.benign_corpus_path.empty()) benign = load_lines(cfg.resolve(cfg.benign_corpus_path));
        if (a.negatives_ratio > 0.0 && benign.empty()) {
            err << "error: negatives requested but the campaign has no benign corpus\n";
            return code(ExitCode::UsageOrConfig);
        }
        Rng rng(cfg.seed);
        const auto plan = trainpipe::curriculum_plan(records, a.tiers);
        const auto negatives = trainpipe::synth_negatives(records, benign, a.negatives_ratio, rng);
        trainpipe::export_dataset(plan, negatives, a.tiers, cfg.config_hash, a.out);
        out << (fs::path(a.out) / "manifest.json").string() << '\n';
        return code(ExitCode::Ok);
    } catch (const std::exception& e) {
        return report_failure(e, err);
    }
}

targets::TargetSpec parse_target_arg(const std::string& spec) {
    if (spec.rfind("mock:", 0) == 0) {
        targets::TargetSpec t;
        t.id = "probe";
        t.kind = targets::MockSpec{spec.substr(5)};
        return t;
    }
    const json j = json::parse(spec, nullptr, false);
    if (j.is_discarded()) throw ValidationError("target", "expected mock:PATH or a JSON target spec");
    json with_id = j;
    if (!with_id.contains("id")) with_id["id"] = "probe";
    return targets::target_spec_from_json(with_id);
}

int cmd_probe(const std::string& spec, std::ostream& out, std::ostream& err) {
    std::unique_ptr<targets::Target> target;
    try {
        target = targets::make_target(parse_target_arg(spec));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return code(ExitCode::UsageOrConfig);
    }
    const auto r = target->respond(kProbePrompt);
    if (r.status == targets::ResponseStatus::Unreachable) {
        out << "status=unreachable latency_ms=" << r.latency_ms << " error=" << r.error << '\n';
        return code(ExitCode::TargetUnreachable);
    }
    out << "status=ok latency_ms=" << r.latency_ms << " response=" << r.text << '\n';
    return code(ExitCode::Ok);
}

int cmd_replay(const fs::path& dir, const std::string& vuln_id, std::ostream& out, std::ostream& err) {
    if (!require_campaign(dir, err)) return code(ExitCode::UsageOrConfig);
    try {
        const auto records = campaign::load_vulns(dir);
        const auto it = std::find_if(records.begin(), records.end(),
                                     [&](const VulnerabilityRecord& r) { return r.id == vuln_id; });
        if (it == records.end()) {
            err << "error: no vulnerability " << vuln_id << " in " << dir.string() << '\n';
            return code(ExitCode::UsageOrConfig);
        }
        const auto cfg = campaign::load_campaign_config(dir);
        mutation::Lexicon lexicon;
        if (!cfg.lexicon_path.empty()) lexicon = mutation::Lexicon::load(cfg.resolve(cfg.lexicon_path));
        const mutation::MutationContext ctx{&lexicon, {}, nullptr};
        const auto text = mutation::replay(it->genome.origin_text, it->reproduction.operator_history, ctx);
        out << text << '\n';
        if (text != it->genome.text) {
            err << "error: replay diverged from the recorded prompt\n";
            return code(ExitCode::Internal);
        }
        return code(ExitCode::Ok);
    } catch (const std::exception& e) {
        return report_failure(e, err);
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Automated red-teaming campaigns against language-model targets", "redteam"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run a campaign until its episode budget is spent");
    run_cmd->add_option("--config", run_args.config, "Campaign config (JSON)")->required();
    run_cmd->add_option("--seed", run_args.seed, "Override the config seed");
    run_cmd->add_option("--episodes", run_args.episodes, "Override the episode budget");
    run_cmd->add_option("--out", run_args.out, "Campaign output directory");

    std::string campaign_dir;
    std::string format = "md";
    auto* report_cmd = app.add_subcommand("report", "Verify the log and render a report");
    report_cmd->add_option("--campaign", campaign_dir, "Campaign directory")->required();
    report_cmd->add_option("--format", format, "md or json");

    ExportArgs export_args;
    auto* export_cmd = app.add_subcommand("export-dataset", "Export a curriculum-tiered training dataset");
    export_cmd->add_option("--campaign", export_args.campaign, "Campaign directory")->required();
    export_cmd->add_option("--out", export_args.out, "Output directory")->required();
    export_cmd->add_option("--tiers", export_args.tiers, "Number of curriculum tiers");
    export_cmd->add_option("--negatives-ratio", export_args.negatives_ratio, "Benign examples per record");

    auto* verify_cmd = app.add_subcommand("verify", "Check the audit hash chain");
    verify_cmd->add_option("--campaign", campaign_dir, "Campaign directory")->required();

    auto* metrics_cmd = app.add_subcommand("metrics", "Print the metric snapshot as JSON");
    metrics_cmd->add_option("--campaign", campaign_dir, "Campaign directory")->required();

    std::string target_spec;
    auto* probe_cmd = app.add_subcommand("probe", "Send a benign prompt to one target");
    probe_cmd->add_option("--target", target_spec, "mock:RULES_PATH or a JSON target spec")->required();

    std::string vuln_id;
    auto* replay_cmd = app.add_subcommand("replay", "Regenerate a recorded prompt from its lineage");
    replay_cmd->add_option("--campaign", campaign_dir, "Campaign directory")->required();
    replay_cmd->add_option("--vuln", vuln_id, "Vulnerability id")->required();

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? code(ExitCode::Ok) : code(ExitCode::UsageOrConfig);
    }

    try {
        if (*run_cmd) return cmd_run(run_args, out, err);
        if (*report_cmd) return cmd_report(campaign_dir, format, out, err);
        if (*export_cmd) return cmd_export(export_args, out, err);
        if (*verify_cmd) return cmd_verify(campaign_dir, out, err);
        if (*metrics_cmd) return cmd_metrics(campaign_dir, out, err);
        if (*probe_cmd) return cmd_probe(target_spec, out, err);
        if (*replay_cmd) return cmd_replay(campaign_dir, vuln_id, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return code(ExitCode::Internal);
    }
    return code(ExitCode::UsageOrConfig);
}

}  // namespace redteam::cli
