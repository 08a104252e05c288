#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "chantwin/materials.hpp"
#include "chantwin/scene.hpp"

namespace httplib {
class Server;
}

namespace chantwin {

struct Footprint {
    std::vector<std::vector<std::array<double, 2>>> polygons;  // counter-clockwise rings, not closed
    Aabb bounds;
};

/// Convex hull of the xy projection of each connected group of triangles that rises above the
/// lowest point of the scene.
Footprint scene_footprint(const Scene& scene, double ground_tolerance_m = 0.05);

enum class JobStatus { Queued, Running, Done, Failed };

const char* job_status_name(JobStatus s);

struct Job {
    std::string id;
    std::string kind = "coverage";
    JobStatus status = JobStatus::Queued;
    double progress = 0.0;
    double created_at = 0.0;  // unix seconds
    double started_at = 0.0;
    double finished_at = 0.0;
    nlohmann::json request;
    std::string error;
};

nlohmann::json job_to_json(const Job& job);

struct ServiceOptions {
    std::filesystem::path data_dir = "mart-data";
    int max_concurrent_jobs = 2;
    int job_threads = 0;            // per coverage job; <= 0 = hardware concurrency
    int max_concurrent_links = 8;   // beyond this POST /api/link answers 503
    std::size_t max_payload_bytes = 100u * 1024u * 1024u;
    std::filesystem::path ui_dir;  // served under /ui when it exists
    MaterialLibrary library = default_material_library();
};

/// Scene registry, coverage job queue and synchronous link queries over HTTP.
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Blocking; returns after stop().
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and serves on a background thread; returns the port.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

    httplib::Server& server() { return *server_; }

    std::optional<Job> job(const std::string& id) const;

private:
    void routes();
    void recover();
    void worker_loop();
    void run_coverage(const std::string& id);
    void journal(const Job& job);
    std::shared_ptr<const Scene> scene(const std::string& id);
    std::string next_id(const char* prefix, std::size_t& counter);

    ServiceOptions opt_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, Job> jobs_;
    std::deque<std::string> queue_;
    std::map<std::string, std::shared_ptr<std::atomic<bool>>> cancel_;
    std::map<std::string, std::shared_ptr<const Scene>> scenes_;
    std::size_t scene_counter_ = 0;
    std::size_t job_counter_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;

    std::mutex journal_mu_;
    std::ofstream journal_;
    std::atomic<int> links_in_flight_{0};
};

}  // namespace chantwin
