// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "redteam/audit.hpp"
#include "redteam/campaign.hpp"
#include "redteam/cli.hpp"
#include "redteam/config.hpp"
#include "redteam/errors.hpp"
#include "redteam/evolve.hpp"
#include "redteam/metrics.hpp"
#include "redteam/mutation.hpp"
#include "redteam/targets.hpp"
#include "redteam/textops.hpp"
#include "redteam/trainpipe.hpp"
#include "test_support.hpp"

using namespace redteam;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail << std::endl;
}

/// Runs a criterion body, turning an unexpected exception into a failure line.
void criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [ok, detail] = body();
        report(id, name, ok, detail);
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::string events_without_timestamps(const fs::path& path) {
    std::istringstream in(testsupport::read_file(path));
    std::string out;
    std::string line;
    while (std::getline(in, line)) {
        auto j = json::parse(line);
        j.erase("ts");
        j.erase("ts_seal");
        out += canonical_dump(j) + "\n";
    }
    return out;
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "redteam");
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

// ---------------------------------------------------------------------------
// Independent oracles.

double weighted_sum(const std::vector<double>& w, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * c[i];
    return s;
}

double ewc_penalty_oracle(const std::vector<double>& theta, const trainpipe::EwcState& s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) sum += s.fisher[i] * (theta[i] - s.anchor[i]) * (theta[i] - s.anchor[i]);
    return 0.5 * s.lam * sum;
}

/// Leader clustering written out directly from its definition: each text
/// joins the first existing leader within the distance threshold, otherwise
/// it founds a new cluster; the diversity is exp(Shannon entropy).
double adm_oracle(const std::vector<std::string>& texts) {
    std::vector<std::string> leaders;
    std::vector<std::size_t> sizes;
    for (const auto& t : texts) {
        std::size_t k = 0;
        while (k < leaders.size() && textops::distance(t, leaders[k]) > metrics::kClusterThreshold) ++k;
        if (k == leaders.size()) {
            leaders.push_back(t);
            sizes.push_back(0);
        }
        ++sizes[k];
    }
    double h = 0.0;
    for (auto s : sizes) {
        const double p = static_cast<double>(s) / static_cast<double>(texts.size());
        h -= p * std::log(p);
    }
    return std::exp(h);
}

struct SubsetVerdict {
    bool success = false;
    double score = 0.0;
    std::optional<std::string> rule_id;
};

/// Best rule by matched fraction (ties by smaller id); success iff the
/// trigger set is a subset of the prompt's token set.
SubsetVerdict subset_oracle(const std::vector<targets::MockRule>& rules, const std::set<std::string>& prompt) {
    SubsetVerdict best;
    double best_frac = 0.0;
    const targets::MockRule* best_rule = nullptr;
    for (const auto& r : rules) {
        std::size_t k = 0;
        for (const auto& t : r.trigger_tokens) k += prompt.count(t);
        const double frac = static_cast<double>(k) / static_cast<double>(r.trigger_tokens.size());
        if (k == 0) continue;
        if (best_rule == nullptr || frac > best_frac || (frac == best_frac && r.rule_id < best_rule->rule_id)) {
            best_rule = &r;
            best_frac = frac;
        }
    }
    if (best_rule == nullptr) return best;
    best.rule_id = best_rule->rule_id;
    best.success = std::includes(prompt.begin(), prompt.end(), best_rule->trigger_tokens.begin(),
                                 best_rule->trigger_tokens.end());
    best.score = best.success ? 1.0 : best_frac;
    return best;
}

// ---------------------------------------------------------------------------

struct ScenarioRuns {
    std::vector<double> ga_rules;
    std::vector<double> random_rules;
    std::vector<double> ga_div20;
    std::vector<double> nodef_div20;
    double ga_random_seconds = 0.0;
};

campaign::CampaignSummary run_scenario(const json& overrides, const fs::path& dir) {
    return campaign::run_campaign(testsupport::scenario_config(overrides), dir);
}

}  // namespace

int main() {
    const auto root = testsupport::scratch_dir("acceptance");
    const auto base_dir = root / "base-a";

    // 1. Determinism.
    campaign::CampaignSummary base;
    criterion(1, "determinism", [&] {
        const auto t0 = Clock::now();
        base = run_scenario(json::object(), base_dir);
        run_scenario(json::object(), root / "base-b");
        const double secs = seconds_since(t0);
        const bool same = events_without_timestamps(base_dir / "events.jsonl") ==
                          events_without_timestamps(root / "base-b" / "events.jsonl");
        return std::make_pair(same && secs < 60.0,
                              std::string(same ? "identical" : "DIFFERENT") + " events.jsonl across two runs in " +
                                  fmt(secs) + " s (limit 60 s)");
    });

    // 2 and 4 share the per-seed campaigns.
    ScenarioRuns runs;
    criterion(2, "GA efficacy", [&] {
        const auto t0 = Clock::now();
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto ga = run_scenario(json{{"seed", seed}, {"strategy", "ga"}}, root / ("ga-" + std::to_string(seed)));
            const auto rnd =
                run_scenario(json{{"seed", seed}, {"strategy", "random"}}, root / ("random-" + std::to_string(seed)));
            runs.ga_rules.push_back(static_cast<double>(ga.rules_compromised));
            runs.random_rules.push_back(static_cast<double>(rnd.rules_compromised));
            runs.ga_div20.push_back(ga.diversity_by_round.at(20));
        }
        runs.ga_random_seconds = seconds_since(t0);
        const double g = median(runs.ga_rules);
        const double r = median(runs.random_rules);
        return std::make_pair(g >= 2.0 * r && runs.ga_random_seconds < 120.0,
                              "median distinct rules GA " + fmt(g) + " vs random " + fmt(r) + " (need >= 2x) in " +
                                  fmt(runs.ga_random_seconds) + " s (limit 120 s)");
    });

    // 3. Coverage.
    criterion(3, "coverage", [&] {
        const auto& cov = base.coverage_by_round;
        const bool monotone = std::is_sorted(cov.begin(), cov.end());
        return std::make_pair(base.final_coverage >= 0.6 && monotone && !cov.empty(),
                              "final coverage " + fmt(base.final_coverage) + " (need >= 0.6), " +
                                  (monotone ? "non-decreasing" : "DECREASES") + " over " +
                                  std::to_string(cov.size()) + " rounds");
    });

    // 4. Diversity with defenders versus the no-defender ablation.
    criterion(4, "defender diversity", [&] {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto s = run_scenario(json{{"seed", seed}, {"defenders_enabled", false}},
                                        root / ("nodef-" + std::to_string(seed)));
            runs.nodef_div20.push_back(s.diversity_by_round.at(20));
        }
        if (runs.ga_div20.size() != 5) return std::make_pair(false, std::string("GA runs unavailable"));
        const double with = median(runs.ga_div20);
        const double without = median(runs.nodef_div20);
        return std::make_pair(with > without, "median diversity at round 20: defenders " + fmt(with) +
                                                  " vs no defenders " + fmt(without));
    });

    // 5. Combiners.
    criterion(5, "combiners", [&] {
        Rng rng(2024);
        auto draw = [&] { return rng.uniform() * 4.0 - 2.0; };
        double worst = 0.0;
        bool linear = true;
        for (int i = 0; i < 1000; ++i) {
            std::vector<double> w(5), c(5), d(5);
            for (int k = 0; k < 5; ++k) {
                w[k] = draw();
                c[k] = draw();
                d[k] = draw();
            }
            const trainpipe::LossWeights lw{w[0], w[1], w[2], w[3], w[4]};
            auto loss = [&](const std::vector<double>& v) {
                return trainpipe::combine_losses({v[0], v[1], v[2], v[3], v[4]}, lw);
            };
            const evolve::FitnessWeights fw{w[0], w[1], w[2], w[3], w[4]};
            auto fit = [&](const std::vector<double>& v) {
                // alpha..epsilon pair with asr, sim, div, trans, sever in that order.
                return evolve::aggregate({v[0], v[1], v[2], v[3], v[4]}, fw);
            };
            const double oracle = weighted_sum(w, c);
            worst = std::max({worst, std::abs(loss(c) - oracle), std::abs(fit(c) - oracle)});

            std::vector<double> sum(5), scaled(5);
            const double k = draw();
            for (int j = 0; j < 5; ++j) {
                sum[j] = c[j] + d[j];
                scaled[j] = k * c[j];
            }
            const double tol = 1e-12 * (1.0 + std::abs(oracle) + std::abs(weighted_sum(w, d)));
            linear = linear && std::abs(loss(sum) - (loss(c) + loss(d))) <= 1e-11 &&
                     std::abs(fit(sum) - (fit(c) + fit(d))) <= 1e-11 &&
                     std::abs(loss(scaled) - k * loss(c)) <= 1e-11 + tol &&
                     std::abs(fit(scaled) - k * fit(c)) <= 1e-11 + tol;
        }
        return std::make_pair(worst <= 1e-12 && linear, "max |combiner - oracle| = " + fmt(worst) +
                                                            " over 1000 draws (limit 1e-12); additivity and "
                                                            "homogeneity " +
                                                            (linear ? "hold" : "VIOLATED"));
    });

    // 6. EWC gradient against central finite differences.
    criterion(6, "EWC gradient", [&] {
        Rng rng(77);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            trainpipe::EwcState s;
            s.lam = 0.5 + 4.0 * rng.uniform();
            std::vector<double> theta(32);
            for (int i = 0; i < 32; ++i) {
                s.fisher.push_back(rng.uniform() * 2.0);
                s.anchor.push_back(rng.uniform() * 2.0 - 1.0);
                theta[i] = rng.uniform() * 2.0 - 1.0;
            }
            const auto grad = trainpipe::ewc_penalty(theta, s).gradient;
            const double h = 1e-5;
            double num2 = 0.0, diff2 = 0.0;
            for (int i = 0; i < 32; ++i) {
                auto up = theta, down = theta;
                up[i] += h;
                down[i] -= h;
                const double fd = (trainpipe::ewc_penalty(up, s).penalty - trainpipe::ewc_penalty(down, s).penalty) /
                                  (2.0 * h);
                diff2 += (fd - grad[i]) * (fd - grad[i]);
                num2 += fd * fd;
            }
            // Cross-check the penalty itself against the closed form.
            if (std::abs(trainpipe::ewc_penalty(theta, s).penalty - ewc_penalty_oracle(theta, s)) > 1e-12)
                worst = 1.0;
            worst = std::max(worst, std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-300));
        }
        return std::make_pair(worst < 1e-6,
                              "max relative error " + fmt(worst) + " over 100 random 32-dim instances (limit 1e-6)");
    });

    // 7. Scheduler exactness.
    criterion(7, "scheduler exactness", [&] {
        bool ok = true;
        std::string why;
        for (const auto& s : {trainpipe::LrSchedule{0.001, 0.1, 10, 1.0}, trainpipe::LrSchedule{0.0, 0.5, 8, 2.0}}) {
            std::uint64_t offset = 0;
            double len = static_cast<double>(s.t_i);
            for (int cycle = 0; cycle < 3; ++cycle) {
                const auto l = static_cast<std::uint64_t>(std::round(len));
                ok = ok && trainpipe::lr_at(s, offset) == s.eta_max && trainpipe::lr_at(s, offset + l) == s.eta_min &&
                     std::abs(trainpipe::lr_at(s, offset + l / 2) - 0.5 * (s.eta_min + s.eta_max)) <= 1e-15;
                offset += l + 1;
                len *= s.mult;
            }
        }
        if (!ok) why = "lr_at endpoints/midpoint differ; ";
        for (double c0 : {0.05, 0.1, 0.5}) {
            const trainpipe::CurriculumParams p{c0, 1000};
            bool mono = true;
            for (std::uint64_t t = 1; t <= 1100; ++t) mono = mono && trainpipe::competence(t, p) >= trainpipe::competence(t - 1, p);
            const bool ends = trainpipe::competence(0, p) == c0 && trainpipe::competence(1000, p) == 1.0;
            if (!mono || !ends) why += "competence c0=" + fmt(c0) + (mono ? " endpoints" : " not monotone") + "; ";
            ok = ok && mono && ends;
        }
        return std::make_pair(ok, ok ? std::string("lr_at exact at cycle start/end/middle over 3 cycles (T_mult 1 "
                                                   "and 2); competence(0)=c0, competence(T)=1, monotone")
                                     : why);
    });

    // 8. adm versus the brute-force oracle.
    criterion(8, "adm oracle", [&] {
        Rng rng(8);
        const std::vector<std::string> words = {"ignore", "previous", "rules", "reveal", "secret", "password",
                                                "story",  "then",     "summary", "admin", "urgent", "code"};
        int mismatches = 0;
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + rng.below(12);
            std::vector<std::string> texts;
            for (std::size_t i = 0; i < n; ++i) {
                std::string t;
                const std::size_t len = 1 + rng.below(5);
                for (std::size_t k = 0; k < len; ++k) t += (k ? " " : "") + words[rng.below(words.size())];
                texts.push_back(t);
            }
            if (metrics::adm(texts) != adm_oracle(texts)) ++mismatches;
        }
        return std::make_pair(mismatches == 0,
                              std::to_string(mismatches) + " bitwise mismatches over 200 trials with n <= 12");
    });

    // 9. judge(mock_respond) versus the subset oracle.
    criterion(9, "judge subset oracle", [&] {
        std::vector<std::string> vocab;
        for (int i = 0; i < 12; ++i) vocab.push_back("w" + std::to_string(i));
        Rng rng(9);
        std::size_t checked = 0;
        std::size_t mismatches = 0;
        for (std::size_t nrules = 1; nrules <= 5; ++nrules) {
            for (int set = 0; set < 4; ++set) {
                std::vector<targets::MockRule> rules;
                for (std::size_t r = 0; r < nrules; ++r) {
                    targets::MockRule rule;
                    rule.rule_id = "r" + std::to_string(rng.below(10)) + std::to_string(r);
                    const std::size_t ntok = 1 + rng.below(4);
                    while (rule.trigger_tokens.size() < ntok) rule.trigger_tokens.insert(vocab[rng.below(vocab.size())]);
                    rules.push_back(rule);
                }
                for (std::uint32_t mask = 0; mask < (1u << vocab.size()); ++mask) {
                    std::set<std::string> prompt_tokens;
                    std::string prompt;
                    for (std::size_t b = 0; b < vocab.size(); ++b)
                        if (mask & (1u << b)) {
                            prompt_tokens.insert(vocab[b]);
                            prompt += vocab[b] + " ";
                        }
                    const auto got = targets::judge(targets::mock_respond(rules, prompt));
                    const auto want = subset_oracle(rules, prompt_tokens);
                    ++checked;
                    if (got.success != want.success || got.score != want.score || got.rule_id != want.rule_id)
                        ++mismatches;
                }
            }
        }
        return std::make_pair(mismatches == 0, std::to_string(mismatches) + " mismatches over " +
                                                   std::to_string(checked) +
                                                   " prompts (all subsets of 12 tokens, 1..5 rules)");
    });

    // 10. Tamper detection.
    criterion(10, "tamper detection", [&] {
        const auto dir = root / "tamper";
        fs::create_directories(dir);
        {
            audit::AuditLog log(dir / "events.jsonl");
            log.record_event(0, audit::EventKind::CampaignStart, json{{"campaign_id", "c-test"}, {"config_hash", "x"}});
            for (int i = 1; i < 500; ++i)
                log.record_event(static_cast<std::uint32_t>(i / 10), audit::EventKind::Warning,
                                 json{{"message", "event " + std::to_string(i)}, {"value", i * 0.5}});
        }
        const auto pristine = testsupport::read_file(dir / "events.jsonl");
        Rng rng(10);
        int undetected = 0;
        int report_misses = 0;
        for (int i = 0; i < 1000; ++i) {
            auto tampered = pristine;
            const auto pos = rng.below(tampered.size());
            const auto flip = static_cast<char>(1 + rng.below(255));
            tampered[pos] = static_cast<char>(tampered[pos] ^ flip);
            testsupport::write_file(dir / "events.jsonl", tampered);
            if (audit::verify_log(dir / "events.jsonl").ok) ++undetected;
            if (run_cli({"report", "--campaign", dir.string()}) != 3) ++report_misses;
        }
        testsupport::write_file(dir / "events.jsonl", pristine);
        const bool clean = audit::verify_log(dir / "events.jsonl").ok;
        return std::make_pair(undetected == 0 && report_misses == 0 && clean,
                              std::to_string(1000 - undetected) + "/1000 flips detected by verify_log; report exit 3 on " +
                                  std::to_string(1000 - report_misses) + "/1000");
    });

    // 11. Replay every record.
    std::vector<VulnerabilityRecord> records;
    criterion(11, "replay", [&] {
        const auto cfg = campaign::load_campaign_config(base_dir);
        const auto lex = mutation::Lexicon::load(cfg.resolve(cfg.lexicon_path));
        const mutation::MutationContext ctx{&lex, {}, nullptr};
        std::size_t total = 0;
        std::size_t diverged = 0;
        for (const auto& dir : {base_dir, root / "ga-1", root / "ga-2", root / "random-1"}) {
            for (const auto& r : campaign::load_vulns(dir)) {
                ++total;
                if (mutation::replay(r.genome.origin_text, r.reproduction.operator_history, ctx) != r.genome.text)
                    ++diverged;
            }
        }
        records = campaign::load_vulns(base_dir);
        return std::make_pair(total > 0 && diverged == 0,
                              std::to_string(total - diverged) + "/" + std::to_string(total) +
                                  " records regenerate their prompt byte-identically");
    });

    // 12. Curriculum export.
    criterion(12, "curriculum export", [&] {
        const auto out_a = root / "export-a";
        const auto out_b = root / "export-b";
        const std::size_t tiers = 3;
        if (run_cli({"export-dataset", "--campaign", base_dir.string(), "--out", out_a.string()}) != 0 ||
            run_cli({"export-dataset", "--campaign", base_dir.string(), "--out", out_b.string()}) != 0)
            return std::make_pair(false, std::string("export-dataset failed"));

        const auto manifest = json::parse(testsupport::read_file(out_a / "manifest.json"));
        const auto expected_sizes = trainpipe::tier_sizes(records.size(), tiers);
        bool ordered = true;
        bool sizes_ok = true;
        bool counts_ok = true;
        bool identical = testsupport::read_file(out_a / "manifest.json") == testsupport::read_file(out_b / "manifest.json");
        double prev_max = -1.0;
        std::size_t adv_total = 0, ben_total = 0;
        std::map<std::string, std::size_t> severity, category;
        for (std::size_t k = 0; k < tiers; ++k) {
            const auto name = "tier_" + std::to_string(k) + ".jsonl";
            const auto body = testsupport::read_file(out_a / name);
            identical = identical && body == testsupport::read_file(out_b / name);
            std::istringstream in(body);
            std::string line;
            std::size_t adv = 0, ben = 0;
            double lo = INFINITY, hi = -INFINITY;
            while (std::getline(in, line)) {
                const auto e = json::parse(line).get<trainpipe::DatasetExample>();
                if (e.tier != k) ordered = false;
                if (e.label == trainpipe::ExampleLabel::Adversarial) {
                    ++adv;
                    lo = std::min(lo, e.complexity);
                    hi = std::max(hi, e.complexity);
                    ++severity[std::string(to_string(*e.severity))];
                    ++category[std::string(to_string(*e.category))];
                } else {
                    ++ben;
                }
            }
            if (adv > 0) {
                ordered = ordered && prev_max <= lo;
                prev_max = hi;
            }
            sizes_ok = sizes_ok && adv == expected_sizes[k];
            const auto& row = manifest.at("tiers").at(k);
            counts_ok = counts_ok && row.at("adversarial") == adv && row.at("benign") == ben &&
                        row.at("count") == adv + ben;
            adv_total += adv;
            ben_total += ben;
        }
        counts_ok = counts_ok && manifest.at("labels").at("adversarial") == adv_total &&
                    manifest.at("labels").at("benign") == ben_total && manifest.at("total") == adv_total + ben_total &&
                    manifest.at("severity") == json(severity) && manifest.at("category") == json(category) &&
                    adv_total == records.size();
        std::ostringstream detail;
        detail << records.size() << " records in tiers (";
        for (std::size_t k = 0; k < tiers; ++k) detail << (k ? "," : "") << expected_sizes[k];
        detail << "); ordering " << (ordered ? "ok" : "BROKEN") << ", sizes " << (sizes_ok ? "ok" : "WRONG")
               << ", manifest " << (counts_ok ? "matches" : "DIFFERS") << ", double export "
               << (identical ? "byte-identical" : "DIFFERS");
        return std::make_pair(ordered && sizes_ok && counts_ok && identical && !records.empty(), detail.str());
    });

    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    fs::remove_all(root);
    return failures == 0 ? 0 : 1;
}
