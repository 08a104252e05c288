#include <gtest/gtest.h>

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "chantwin/fixtures.hpp"
#include "chantwin/service.hpp"

using namespace chantwin;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("chantwin-service-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ServiceOptions options(const fs::path& dir) {
    ServiceOptions o;
    o.data_dir = dir;
    o.max_concurrent_jobs = 1;
    o.job_threads = 1;
    return o;
}

json body(const httplib::Result& r) { return json::parse(r->body); }

std::string upload(httplib::Client& c, const Scene& scene) {
    auto r = c.Post("/api/scenes", scene_to_json(scene), "application/json");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 201);
    return body(r).at("scene_id").get<std::string>();
}

std::string submit(httplib::Client& c, const json& request) {
    auto r = c.Post("/api/jobs/coverage", request.dump(), "application/json");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 202) << r->body;
    return body(r).at("job_id").get<std::string>();
}

json wait_for(httplib::Client& c, const std::string& id, const std::string& status, double timeout_s = 120.0) {
    const auto t0 = std::chrono::steady_clock::now();
    for (;;) {
        auto j = body(c.Get("/api/jobs/" + id));
        if (j.at("status") == status) return j;
        if (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > timeout_s) return j;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

double friis_db(double d, double f) { return 20.0 * std::log10(4.0 * kPi * d * f / kSpeedOfLight); }

}  // namespace

TEST(Footprint, FixtureShapes) {
    const auto box = scene_footprint(fixtures::box({-5, -5, 0}, {5, 5, 10}));
    ASSERT_EQ(box.polygons.size(), 1u);
    ASSERT_EQ(box.polygons[0].size(), 4u);
    for (const auto& v : box.polygons[0]) {
        EXPECT_DOUBLE_EQ(std::abs(v[0]), 5.0);
        EXPECT_DOUBLE_EQ(std::abs(v[1]), 5.0);
    }
    EXPECT_TRUE(scene_footprint(fixtures::free_space()).polygons.empty());
    const auto campus = fixtures::campus();
    EXPECT_EQ(scene_footprint(campus.scene).polygons.size(), campus.building_count);
}

TEST(Service, ScenesAndErrors) {
    TempDir dir;
    Service svc(options(dir.path));
    httplib::Client c("127.0.0.1", svc.start_background());
    EXPECT_EQ(c.Get("/api/health")->status, 200);

    const auto box_id = upload(c, fixtures::box({-5, -5, 0}, {5, 5, 10}));
    EXPECT_NE(upload(c, fixtures::box({-5, -5, 0}, {5, 5, 10})), box_id);
    auto bad = c.Post("/api/scenes", R"({"vertices": [[0,0,0]], "triangles": [[0, 1, 7]]})", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_TRUE(body(bad).contains("error"));
    EXPECT_EQ(c.Post("/api/scenes", "{", "application/json")->status, 400);

    auto fp = body(c.Get("/api/scenes/" + box_id + "/footprint"));
    EXPECT_EQ(fp.at("polygons").size(), 1u);
    const auto free_id = upload(c, fixtures::free_space());
    EXPECT_TRUE(body(c.Get("/api/scenes/" + free_id + "/footprint")).at("polygons").empty());
    const auto campus_id = upload(c, fixtures::campus().scene);
    EXPECT_EQ(body(c.Get("/api/scenes/" + campus_id + "/footprint")).at("polygons").size(), 10u);
    EXPECT_EQ(c.Get("/api/scenes/scene-999999/footprint")->status, 404);
    EXPECT_EQ(body(c.Get("/api/scenes")).at("scenes").size(), 4u);

    const json job = {{"scene_id", "scene-999999"}, {"tx", {{"pos", {0, 0, 10}}}}, {"freq_hz", 3.5e9},
                      {"grid", "-5,-5,5,5,1"}};
    EXPECT_EQ(c.Post("/api/jobs/coverage", job.dump(), "application/json")->status, 404);
    json bad_grid = job;
    bad_grid["scene_id"] = box_id;
    bad_grid["grid"] = "1,2";
    EXPECT_EQ(c.Post("/api/jobs/coverage", bad_grid.dump(), "application/json")->status, 400);
    bad_grid["grid"] = "-500,-500,500,500,10";
    EXPECT_EQ(c.Post("/api/jobs/coverage", bad_grid.dump(), "application/json")->status, 400);
    bad_grid["grid"] = "-5,-5,5,5,1";
    bad_grid["profile"] = "realtime";
    EXPECT_EQ(c.Post("/api/jobs/coverage", bad_grid.dump(), "application/json")->status, 400);
    EXPECT_EQ(c.Get("/api/jobs/job-999999")->status, 404);
    EXPECT_EQ(c.Get("/api/jobs/job-999999/result")->status, 404);
    EXPECT_EQ(c.Delete("/api/jobs/job-999999")->status, 404);

    auto pre = c.Options("/api/scenes");
    EXPECT_EQ(pre->status, 204);
    EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Service, PayloadLimit) {
    TempDir dir;
    auto o = options(dir.path);
    o.max_payload_bytes = 1000;
    Service svc(o);
    httplib::Client c("127.0.0.1", svc.start_background());
    EXPECT_EQ(c.Post("/api/scenes", scene_to_json(fixtures::campus().scene), "application/json")->status, 413);
}

TEST(Service, CoverageLifecycleAndRestart) {
    TempDir dir;
    std::string result_body, campus_job, free_job;
    {
        Service svc(options(dir.path));
        httplib::Client c("127.0.0.1", svc.start_background());
        const auto campus_id = upload(c, fixtures::campus().scene);
        const auto free_id = upload(c, fixtures::free_space());

        // A long job occupies the single worker so the next one is observably queued.
        campus_job = submit(c, {{"scene_id", campus_id},
                                {"tx", {{"pos", {0, -20, 10}}, {"power_dbm", 30}}},
                                {"freq_hz", 3.5e9},
                                {"profile", "online"},
                                {"grid", "-50,-50,50,50,2"}});
        EXPECT_EQ(wait_for(c, campus_job, "running").at("status"), "running");
        free_job = submit(c, {{"scene_id", free_id},
                              {"tx", {{"pos", {0, 0, 10}}, {"power_dbm", 43}}},
                              {"freq_hz", 6e9},
                              {"profile", "online"},
                              {"grid", {{"xmin", -40}, {"ymin", -40}, {"xmax", 40}, {"ymax", 40}, {"step", 4}}}});
        EXPECT_EQ(body(c.Get("/api/jobs/" + free_job)).at("status"), "queued");
        EXPECT_EQ(c.Get("/api/jobs/" + free_job + "/result")->status, 409);
        EXPECT_EQ(c.Get("/api/jobs/" + campus_job + "/result")->status, 409);

        EXPECT_EQ(c.Delete("/api/jobs/" + campus_job)->status, 200);
        const auto cancelled = wait_for(c, campus_job, "failed");
        EXPECT_EQ(cancelled.at("status"), "failed");
        EXPECT_EQ(cancelled.at("error"), "cancelled");
        EXPECT_EQ(c.Get("/api/jobs/" + campus_job + "/result")->status, 409);

        std::vector<std::string> seen = {"queued"};
        double progress = 0.0;
        const auto t0 = std::chrono::steady_clock::now();
        for (;;) {
            const auto j = body(c.Get("/api/jobs/" + free_job));
            const auto st = j.at("status").get<std::string>();
            if (seen.empty() || seen.back() != st) seen.push_back(st);
            EXPECT_GE(j.at("progress").get<double>(), progress);
            progress = j.at("progress").get<double>();
            if (st == "done" || st == "failed") break;
            ASSERT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 120.0);
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        EXPECT_EQ(seen.back(), "done");
        for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_NE(seen[i], "queued");
        EXPECT_DOUBLE_EQ(progress, 1.0);

        auto res = c.Get("/api/jobs/" + free_job + "/result");
        ASSERT_EQ(res->status, 200);
        result_body = res->body;
        const auto grid = json::parse(result_body);
        EXPECT_EQ(grid.at("cells").size(), 400u);
        for (const auto& cell : grid.at("cells")) {
            const double dx = cell.at("x_m").get<double>(), dy = cell.at("y_m").get<double>();
            const double d = std::sqrt(dx * dx + dy * dy + 8.5 * 8.5);
            EXPECT_NEAR(cell.at("pl_db").get<double>(), friis_db(d, 6e9), 1e-6);
        }
        EXPECT_EQ(body(c.Get("/api/jobs")).at("jobs").size(), 2u);
        svc.stop();
    }
    {
        Service svc(options(dir.path));
        httplib::Client c("127.0.0.1", svc.start_background());
        auto res = c.Get("/api/jobs/" + free_job + "/result");
        ASSERT_EQ(res->status, 200);
        EXPECT_EQ(res->body, result_body);
        EXPECT_EQ(body(c.Get("/api/jobs/" + campus_job)).at("error"), "cancelled");
        EXPECT_EQ(body(c.Get("/api/scenes")).at("scenes").size(), 2u);
        const auto next = upload(c, fixtures::free_space());
        EXPECT_EQ(next, "scene-000003");
    }
}

TEST(Service, RecoveryFromInterruptedJournal) {
    TempDir dir;
    fs::create_directories(dir.path / "jobs");
    {
        std::ofstream j(dir.path / "jobs" / "journal.jsonl");
        j << R"({"job_id":"job-000001","status":"running","created_at":1,"request":{}})" << '\n'
          << R"({"job_id":"job-000002","status":"done","created_at":2,"request":{}})" << '\n'
          << R"({"job_id":"job-000003","status":"queued","created_at":3,"request":{}})" << '\n'
          << R"({"job_id":"job-0000)";
    }
    Service svc(options(dir.path));
    ASSERT_TRUE(svc.job("job-000001"));
    EXPECT_EQ(svc.job("job-000001")->status, JobStatus::Failed);
    EXPECT_EQ(svc.job("job-000002")->status, JobStatus::Failed);
    for (int i = 0; i < 1000 && svc.job("job-000003")->status != JobStatus::Failed; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    EXPECT_EQ(svc.job("job-000003")->status, JobStatus::Failed);
    EXPECT_FALSE(svc.job("job-000003")->error.empty());
}

TEST(Service, LinkQueries) {
    TempDir dir;
    Service svc(options(dir.path));
    httplib::Client c("127.0.0.1", svc.start_background());
    const auto free_id = upload(c, fixtures::free_space());
    const json link = {{"scene_id", free_id}, {"tx", {0, 0, 10}}, {"rx", {100, 0, 10}}, {"freq_hz", 6e9},
                       {"profile", "online"}};
    auto r = c.Post("/api/link", link.dump(), "application/json");
    ASSERT_EQ(r->status, 200) << r->body;
    const auto doc = body(r);
    EXPECT_EQ(doc.at("mpcs").size(), 1u);
    EXPECT_NEAR(doc.at("path_loss_db").get<double>(), 88.01, 0.01);
    EXPECT_NEAR(doc.at("path_loss_db").get<double>(), friis_db(100.0, 6e9), 1e-9);
    EXPECT_TRUE(doc.at("compute_ms").is_number());
    EXPECT_GE(doc.at("compute_ms").get<double>(), 0.0);
    EXPECT_NEAR(doc.at("mpcs")[0].at("delay_s").get<double>(), 100.0 / kSpeedOfLight, 1e-15);

    json offline = link;
    offline["profile"] = "offline";
    EXPECT_EQ(c.Post("/api/link", offline.dump(), "application/json")->status, 400);
    json missing = link;
    missing["scene_id"] = "scene-424242";
    EXPECT_EQ(c.Post("/api/link", missing.dump(), "application/json")->status, 404);
    json no_rx = link;
    no_rx.erase("rx");
    EXPECT_EQ(c.Post("/api/link", no_rx.dump(), "application/json")->status, 400);

    const auto v = fixtures::v2v();
    const auto v2v_id = upload(c, v.scene);
    auto term = [](const Terminal& t) {
        json j = {{"pos", {t.position.x, t.position.y, t.position.z}}, {"power_dbm", t.power_dbm}};
        if (t.attached_object) j["attached_object"] = *t.attached_object;
        return j;
    };
    auto los_delay = [&](double t) {
        const json q = {{"scene_id", v2v_id}, {"tx", term(v.tx)}, {"rx", term(v.rx)}, {"freq_hz", 5.9e9},
                        {"time_s", t}};
        auto res = c.Post("/api/link", q.dump(), "application/json");
        EXPECT_EQ(res->status, 200) << res->body;
        const auto doc = body(res);
        double first = 1e9;
        for (const auto& m : doc.at("mpcs")) first = std::min(first, m.at("delay_s").get<double>());
        return first;
    };
    const double d3 = los_delay(3.0), d6 = los_delay(6.0);
    EXPECT_LT(d6, d3);
    const double sep6 = distance(fixtures::V2v::tx_vehicle_position(6.0), fixtures::V2v::rx_vehicle_position(6.0));
    EXPECT_NEAR(d6, sep6 / kSpeedOfLight, 1e-12);
}

TEST(Service, LinkCapacity) {
    TempDir dir;
    auto o = options(dir.path);
    o.max_concurrent_links = 0;
    Service svc(o);
    httplib::Client c("127.0.0.1", svc.start_background());
    const auto id = upload(c, fixtures::free_space());
    const json link = {{"scene_id", id}, {"tx", {0, 0, 10}}, {"rx", {100, 0, 10}}, {"freq_hz", 6e9}};
    EXPECT_EQ(c.Post("/api/link", link.dump(), "application/json")->status, 503);
}
