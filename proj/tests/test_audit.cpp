#include <doctest.h>

#include "redteam/audit.hpp"
#include "redteam/campaign.hpp"
#include "redteam/errors.hpp"
#include "test_support.hpp"

using namespace redteam;
using namespace redteam::audit;
namespace fs = std::filesystem;

namespace {

Clock fixed_clock() {
    return [] { return std::string("2026-01-01T00:00:00.000Z"); };
}

fs::path write_log(const fs::path& dir, int events) {
    const auto path = dir / "events.jsonl";
    AuditLog log(path, fixed_clock());
    for (int i = 0; i < events; ++i)
        log.record_event(static_cast<std::uint32_t>(i / 3), EventKind::Warning, json{{"message", "event " + std::to_string(i)}});
    return path;
}

/// A short finished campaign shared by the report tests.
const fs::path& finished_campaign() {
    static const fs::path dir = [] {
        auto d = testsupport::scratch_dir("audit-campaign");
        campaign::run_campaign(testsupport::small_config(5, 800), d, {fixed_clock(), {}});
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("event kinds round-trip") {
    for (auto k : {EventKind::CampaignStart, EventKind::Directive, EventKind::Proposal, EventKind::Evaluation,
                   EventKind::Discovery, EventKind::DefenseUpdate, EventKind::RoundSummary, EventKind::Warning,
                   EventKind::CampaignEnd})
        CHECK(parse_event_kind(to_string(k)) == k);
}

TEST_CASE("appending builds a chain") {
    const auto dir = testsupport::scratch_dir("chain");
    const auto path = write_log(dir, 5);
    const auto events = read_events(path);
    REQUIRE(events.size() == 5);
    CHECK(events[0].seq == 0);
    CHECK(events[0].prev_hash == kGenesisHash);
    for (std::size_t i = 1; i < events.size(); ++i) {
        CHECK(events[i].seq == i);
        CHECK(events[i].prev_hash == events[i - 1].hash);
    }
    // Independent recomputation of the hash over the documented fields.
    const auto line = json::parse(testsupport::read_file(path).substr(0, testsupport::read_file(path).find('\n')));
    const json hashed{{"kind", line.at("kind")}, {"payload", line.at("payload")}, {"prev_hash", line.at("prev_hash")},
                      {"round", line.at("round")}, {"seq", line.at("seq")}};
    CHECK(sha256_hex(canonical_dump(hashed)) == line.at("hash").get<std::string>());
    CHECK(sha256_hex(line.at("hash").get<std::string>() + "|" + line.at("ts").get<std::string>()) ==
          line.at("ts_seal").get<std::string>());
}

TEST_CASE("reopening a log continues its chain") {
    const auto dir = testsupport::scratch_dir("reopen");
    const auto path = write_log(dir, 3);
    {
        AuditLog log(path, fixed_clock());
        CHECK(log.next_seq() == 3);
        log.record_event(9, EventKind::Warning, json::object());
    }
    const auto v = verify_log(path);
    CHECK(v.ok);
    CHECK(v.events == 4);
}

TEST_CASE("verification") {
    const auto dir = testsupport::scratch_dir("verify");
    CHECK(verify_log(write_log(dir, 0)).ok);
    const auto path = write_log(testsupport::scratch_dir("verify2"), 6);
    CHECK(verify_log(path).ok);

    auto contents = testsupport::read_file(path);
    const auto pos = contents.find("event 4");
    contents[pos + 6] = '5';
    testsupport::write_file(path, contents);
    const auto v = verify_log(path);
    CHECK_FALSE(v.ok);
    CHECK(v.corrupt_seq == 4);
    CHECK_THROWS_AS(read_events(path), AuditCorrupt);
    CHECK_THROWS_AS(AuditLog(path, fixed_clock()), AuditCorrupt);
}

TEST_CASE("a tampered timestamp breaks the seal") {
    const auto path = write_log(testsupport::scratch_dir("seal"), 2);
    auto contents = testsupport::read_file(path);
    contents.replace(contents.find("2026-01-01"), 10, "2025-01-01");
    testsupport::write_file(path, contents);
    CHECK_FALSE(verify_log(path).ok);
    CHECK(verify_log(path).corrupt_seq == 0);
}

TEST_CASE("vulnerability documents") {
    const auto records = campaign::load_vulns(finished_campaign());
    REQUIRE_FALSE(records.empty());
    const auto doc = document_vulnerability(records.front(), finished_campaign().string());
    CHECK(doc.at("risk").at("severity") == to_string(classify_severity(records.front().vsi)));
    CHECK(doc.at("reproduction").at("replay_command").get<std::string>().find(records.front().id) !=
          std::string::npos);
    CHECK(json::parse(doc.dump()) == doc);
    for (const char* key : {"technical_description", "risk", "reproduction", "timeline"}) CHECK(doc.contains(key));
}

TEST_CASE("report summary") {
    const auto events = read_events(finished_campaign() / "events.jsonl");
    const auto summary = build_report_summary(events);
    std::size_t severity_total = 0;
    for (const auto& [_, n] : summary.at("severity_distribution").items()) severity_total += n.get<std::size_t>();
    CHECK(severity_total == summary.at("totals").at("discoveries").get<std::size_t>());
    CHECK(summary.contains("assumptions"));
    const auto assumptions = summary.at("assumptions").dump();
    for (const char* caveat : {"stand-in heuristic", "not computed", "no external standard", "tool defaults"})
        CHECK_MESSAGE(assumptions.find(caveat) != std::string::npos, caveat);

    // Markdown and structured reports carry identical numbers.
    const auto md = testsupport::read_file(generate_report(finished_campaign(), ReportFormat::Markdown));
    const auto js = json::parse(testsupport::read_file(generate_report(finished_campaign(), ReportFormat::Structured)));
    for (const auto& [name, value] : js.at("metrics").items())
        if (!value.is_null()) CHECK_MESSAGE(md.find(value.dump()) != std::string::npos, name);
    for (const auto& [name, value] : js.at("totals").items())
        CHECK_MESSAGE(md.find(value.dump()) != std::string::npos, name);
}

TEST_CASE("report of a campaign without discoveries") {
    const auto dir = testsupport::scratch_dir("empty-report");
    const auto cfg = testsupport::scenario_config(json{{"episodes", 5}, {"population_size", 4}, {"elite_count", 1}});
    campaign::run_campaign(cfg, dir, {fixed_clock(), {}});
    const auto summary = build_report_summary(read_events(dir / "events.jsonl"));
    CHECK(summary.at("severity_distribution").empty());
    CHECK(summary.at("category_distribution").empty());
    CHECK(summary.at("metrics").at("coverage") == 0.0);
}

TEST_CASE("report generation refuses a corrupt log") {
    const auto dir = testsupport::scratch_dir("corrupt-report");
    write_log(dir, 3);
    auto contents = testsupport::read_file(dir / "events.jsonl");
    contents[contents.find("event 1") + 6] = '9';
    testsupport::write_file(dir / "events.jsonl", contents);
    CHECK_THROWS_AS(generate_report(dir, ReportFormat::Markdown), AuditCorrupt);
}
