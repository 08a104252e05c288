#include "chantwin/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <httplib.h>

#include "chantwin/channel.hpp"
#include "chantwin/errors.hpp"
#include "chantwin/mpc_io.hpp"
#include "chantwin/parallel.hpp"
#include "chantwin/profiles.hpp"

namespace chantwin {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kApiSchemaVersion = 1;

double now_s() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_atomic(const fs::path& p, const std::string& content) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

struct HttpError : std::runtime_error {
    int status;
    HttpError(int s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const HttpError& e) {
        send_error(res, e.status, e.what());
    } catch (const ParseError& e) {
        send_error(res, 400, e.what());
    } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
    } catch (const SceneTooLargeError& e) {
        send_error(res, 400, e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

json parse_body(const httplib::Request& req) {
    try {
        auto doc = json::parse(req.body);
        if (!doc.is_object()) throw HttpError(400, "request body must be a JSON object");
        return doc;
    } catch (const json::parse_error& e) {
        throw HttpError(400, std::string("invalid JSON: ") + e.what());
    }
}

Vec3 vec3_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw HttpError(400, std::string(what) + " must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Terminal terminal_from(const json& j, const char* what) {
    Terminal t;
    if (j.is_array()) {
        t.position = vec3_from(j, what);
        return t;
    }
    if (!j.is_object() || !j.contains("pos")) throw HttpError(400, std::string(what) + " must have 'pos'");
    t.position = vec3_from(j.at("pos"), what);
    t.power_dbm = j.value("power_dbm", 0.0);
    if (j.contains("attached_object")) t.attached_object = j.at("attached_object").get<std::size_t>();
    if (j.contains("antenna")) t.antenna = antenna_from_spec(j.at("antenna").get<std::string>());
    return t;
}

EngineConfig engine_from(const json& body, const std::string& default_profile) {
    const auto profile = builtin_profile(body.value("profile", default_profile));
    ProfileOverrides ov;
    if (body.contains("overrides")) ov = parse_profile_overrides(body.at("overrides").dump());
    return resolve_profile(profile, ov);
}

GridSpec grid_from(const json& j) {
    GridSpec g;
    if (j.is_string()) {
        g = parse_grid_spec(j.get<std::string>());
    } else if (j.is_object()) {
        g.xmin = j.at("xmin").get<double>();
        g.ymin = j.at("ymin").get<double>();
        g.xmax = j.at("xmax").get<double>();
        g.ymax = j.at("ymax").get<double>();
        g.step = j.at("step").get<double>();
        g.height = j.value("height", 1.5);
    } else {
        throw HttpError(400, "grid must be an object or 'xmin,ymin,xmax,ymax,step[,height]'");
    }
    validate_grid(g);
    return g;
}

double cross(const std::array<double, 2>& o, const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<std::array<double, 2>> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0.0) --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

JobStatus status_from(const std::string& s) {
    if (s == "queued") return JobStatus::Queued;
    if (s == "running") return JobStatus::Running;
    if (s == "done") return JobStatus::Done;
    return JobStatus::Failed;
}

}  // namespace

Footprint scene_footprint(const Scene& scene, double ground_tolerance_m) {
    Footprint out;
    out.bounds = scene.bounds;
    if (scene.triangles.empty()) return out;
    const double ground = scene.bounds.lo.z;
    std::vector<std::size_t> raised;
    for (std::size_t t = 0; t < scene.triangles.size(); ++t) {
        const auto& tri = scene.triangles[t];
        double zmax = -std::numeric_limits<double>::infinity();
        for (auto v : tri.v) zmax = std::max(zmax, scene.vertices[v].z);
        if (zmax > ground + ground_tolerance_m) raised.push_back(t);
    }
    // Union-find over triangles sharing a (quantized) vertex position.
    std::vector<std::size_t> parent(raised.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    std::map<std::array<long long, 3>, std::size_t> owner;
    for (std::size_t k = 0; k < raised.size(); ++k)
        for (auto v : scene.triangles[raised[k]].v) {
            const auto& p = scene.vertices[v];
            const std::array<long long, 3> key{std::llround(p.x * 1e6), std::llround(p.y * 1e6), std::llround(p.z * 1e6)};
            auto [it, fresh] = owner.emplace(key, k);
            if (!fresh) parent[find(k)] = find(it->second);
        }
    std::map<std::size_t, std::vector<std::array<double, 2>>> groups;
    for (std::size_t k = 0; k < raised.size(); ++k)
        for (auto v : scene.triangles[raised[k]].v)
            groups[find(k)].push_back({scene.vertices[v].x, scene.vertices[v].y});
    for (auto& [root, pts] : groups) {
        auto hull = convex_hull(std::move(pts));
        if (hull.size() >= 3) out.polygons.push_back(std::move(hull));
    }
    std::sort(out.polygons.begin(), out.polygons.end());
    return out;
}

const char* job_status_name(JobStatus s) {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "failed";
}

json job_to_json(const Job& job) {
    json j = {{"schema_version", kApiSchemaVersion},
              {"job_id", job.id},
              {"kind", job.kind},
              {"status", job_status_name(job.status)},
              {"progress", job.progress},
              {"created_at", job.created_at},
              {"started_at", job.started_at > 0.0 ? json(job.started_at) : json(nullptr)},
              {"finished_at", job.finished_at > 0.0 ? json(job.finished_at) : json(nullptr)},
              {"request", job.request},
              {"result", job.status == JobStatus::Done ? json("/api/jobs/" + job.id + "/result") : json(nullptr)},
              {"error", job.error.empty() ? json(nullptr) : json(job.error)}};
    return j;
}

Service::Service(ServiceOptions options) : opt_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    fs::create_directories(opt_.data_dir / "scenes");
    fs::create_directories(opt_.data_dir / "jobs");
    fs::create_directories(opt_.data_dir / "results");
    recover();
    const auto journal_path = opt_.data_dir / "jobs" / "journal.jsonl";
    {
        std::string compacted;
        for (const auto& [id, job] : jobs_) compacted += job_to_json(job).dump() + "\n";
        write_atomic(journal_path, compacted);
    }
    journal_.open(journal_path, std::ios::app);
    routes();
    const int workers = std::max(1, opt_.max_concurrent_jobs);
    for (int i = 0; i < workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
    stop();
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
        for (auto& [id, flag] : cancel_) flag->store(true);
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
}

void Service::recover() {
    for (const auto& entry : fs::directory_iterator(opt_.data_dir / "scenes")) {
        const auto name = entry.path().stem().string();
        if (entry.path().extension() != ".json" || name.rfind("scene-", 0) != 0) continue;
        scene_counter_ = std::max<std::size_t>(scene_counter_, std::stoull(name.substr(6)));
    }
    std::ifstream in(opt_.data_dir / "jobs" / "journal.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            continue;  // torn final line
        }
        Job job;
        job.id = j.at("job_id").get<std::string>();
        job.kind = j.value("kind", "coverage");
        job.status = status_from(j.at("status").get<std::string>());
        job.progress = j.value("progress", 0.0);
        job.created_at = j.value("created_at", 0.0);
        job.started_at = j["started_at"].is_number() ? j["started_at"].get<double>() : 0.0;
        job.finished_at = j["finished_at"].is_number() ? j["finished_at"].get<double>() : 0.0;
        job.request = j.value("request", json::object());
        job.error = j["error"].is_string() ? j["error"].get<std::string>() : "";
        jobs_[job.id] = job;
        job_counter_ = std::max<std::size_t>(job_counter_, std::stoull(job.id.substr(4)));
    }
    std::vector<std::pair<double, std::string>> requeue;
    for (auto& [id, job] : jobs_) {
        if (job.status == JobStatus::Running) {
            job.status = JobStatus::Failed;
            job.error = "interrupted by service restart";
            job.finished_at = now_s();
        } else if (job.status == JobStatus::Done && !fs::exists(opt_.data_dir / "results" / (id + ".json"))) {
            job.status = JobStatus::Failed;
            job.error = "result file missing";
        } else if (job.status == JobStatus::Queued) {
            requeue.emplace_back(job.created_at, id);
        }
    }
    std::sort(requeue.begin(), requeue.end());
    for (auto& [t, id] : requeue) {
        queue_.push_back(id);
        cancel_[id] = std::make_shared<std::atomic<bool>>(false);
    }
}

void Service::journal(const Job& job) {
    std::lock_guard lock(journal_mu_);
    journal_ << job_to_json(job).dump() << '\n';
    journal_.flush();
}

std::string Service::next_id(const char* prefix, std::size_t& counter) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, ++counter);
    return buf;
}

std::shared_ptr<const Scene> Service::scene(const std::string& id) {
    {
        std::lock_guard lock(mu_);
        if (auto it = scenes_.find(id); it != scenes_.end()) return it->second;
    }
    if (id.find('/') != std::string::npos || id.find("..") != std::string::npos)
        throw HttpError(404, "unknown scene '" + id + "'");
    const auto path = opt_.data_dir / "scenes" / (id + ".json");
    if (!fs::exists(path)) throw HttpError(404, "unknown scene '" + id + "'");
    auto s = std::make_shared<const Scene>(parse_scene(read_file(path), opt_.library));
    std::lock_guard lock(mu_);
    return scenes_.emplace(id, s).first->second;
}

std::optional<Job> Service::job(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

void Service::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
            auto& job = jobs_.at(id);
            if (job.status != JobStatus::Queued) continue;
            job.status = JobStatus::Running;
            job.started_at = now_s();
            journal(job);
        }
        run_coverage(id);
    }
}

void Service::run_coverage(const std::string& id) {
    json request;
    std::shared_ptr<std::atomic<bool>> cancel;
    {
        std::lock_guard lock(mu_);
        request = jobs_.at(id).request;
        cancel = cancel_.at(id);
    }
    std::string error;
    try {
        const auto sc = scene(request.at("scene_id").get<std::string>());
        const auto tx = terminal_from(request.at("tx"), "tx");
        const auto grid = grid_from(request.at("grid"));
        const auto cfg = engine_from(request, "offline");
        CoverageOptions options;
        options.threads = resolve_threads(opt_.job_threads);
        options.time_s = request.value("time_s", 0.0);
        options.cancel = cancel.get();
        options.progress = [&](double p) {
            std::lock_guard lock(mu_);
            auto& job = jobs_.at(id);
            job.progress = std::max(job.progress, std::min(p, 0.999));
        };
        const auto result = coverage(*sc, tx, grid, request.at("freq_hz").get<double>(), cfg, opt_.library, options);
        if (cancel->load()) throw std::runtime_error("cancelled");
        write_atomic(opt_.data_dir / "results" / (id + ".json"), coverage_json(result));
    } catch (const std::exception& e) {
        error = e.what();
    }
    std::lock_guard lock(mu_);
    auto& job = jobs_.at(id);
    job.finished_at = now_s();
    if (error.empty()) {
        job.status = JobStatus::Done;
        job.progress = 1.0;
    } else {
        job.status = JobStatus::Failed;
        job.error = error;
    }
    cancel_.erase(id);
    journal(job);
}

void Service::routes() {
    auto& srv = *server_;
    srv.set_payload_max_length(opt_.max_payload_bytes);
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    if (!opt_.ui_dir.empty() && fs::is_directory(opt_.ui_dir)) srv.set_mount_point("/ui", opt_.ui_dir.string());

    srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}, {"schema_version", kApiSchemaVersion}});
    });

    srv.Post("/api/scenes", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto parsed = std::make_shared<const Scene>(parse_scene(req.body, opt_.library));
            std::string id;
            {
                std::lock_guard lock(mu_);
                id = next_id("scene", scene_counter_);
                scenes_[id] = parsed;
            }
            write_atomic(opt_.data_dir / "scenes" / (id + ".json"), req.body);
            send_json(res, 201, {{"schema_version", kApiSchemaVersion},
                                 {"scene_id", id},
                                 {"triangle_count", parsed->triangles.size()},
                                 {"dropped_degenerate", parsed->dropped_degenerate}});
        });
    });

    srv.Get("/api/scenes", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            std::vector<std::string> ids;
            for (const auto& e : fs::directory_iterator(opt_.data_dir / "scenes"))
                if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
            std::sort(ids.begin(), ids.end());
            json list = json::array();
            for (const auto& id : ids) {
                try {
                    const auto s = scene(id);
                    list.push_back({{"scene_id", id}, {"triangle_count", s->triangles.size()}});
                } catch (const std::exception&) {
                }
            }
            send_json(res, 200, {{"schema_version", kApiSchemaVersion}, {"scenes", list}});
        });
    });

    srv.Get(R"(/api/scenes/([^/]+)/footprint)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto fp = scene_footprint(*scene(req.matches[1]));
            json polys = json::array();
            for (const auto& p : fp.polygons) polys.push_back(p);
            json bounds = nullptr;
            if (!fp.bounds.empty())
                bounds = {{"xmin", fp.bounds.lo.x}, {"ymin", fp.bounds.lo.y}, {"zmin", fp.bounds.lo.z},
                          {"xmax", fp.bounds.hi.x}, {"ymax", fp.bounds.hi.y}, {"zmax", fp.bounds.hi.z}};
            send_json(res, 200, {{"schema_version", kApiSchemaVersion},
                                 {"scene_id", req.matches[1].str()},
                                 {"polygons", polys},
                                 {"bounds", bounds}});
        });
    });

    srv.Post("/api/jobs/coverage", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = parse_body(req);
            if (!body.contains("scene_id") || !body.contains("tx") || !body.contains("freq_hz") ||
                !body.contains("grid"))
                throw HttpError(400, "coverage job needs scene_id, tx, freq_hz and grid");
            const auto sc = scene(body.at("scene_id").get<std::string>());
            terminal_from(body.at("tx"), "tx");
            const auto grid = grid_from(body.at("grid"));
            engine_from(body, "offline");
            if (!(body.at("freq_hz").get<double>() > 0.0)) throw HttpError(400, "freq_hz must be positive");
            if (!sc->bounds.empty()) {
                const auto& b = sc->bounds;
                const double pad = grid.step;
                if (grid.xmin < b.lo.x - pad || grid.xmax > b.hi.x + pad || grid.ymin < b.lo.y - pad ||
                    grid.ymax > b.hi.y + pad)
                    throw HttpError(400, "grid extends beyond the scene bounds");
            }
            Job job;
            job.created_at = now_s();
            job.request = body;
            {
                std::lock_guard lock(mu_);
                job.id = next_id("job", job_counter_);
                jobs_[job.id] = job;
                cancel_[job.id] = std::make_shared<std::atomic<bool>>(false);
                journal(job);
                queue_.push_back(job.id);
            }
            cv_.notify_one();
            send_json(res, 202, {{"schema_version", kApiSchemaVersion}, {"job_id", job.id}, {"status", "queued"}});
        });
    });

    srv.Get("/api/jobs", [this](const httplib::Request&, httplib::Response& res) {
        json list = json::array();
        {
            std::lock_guard lock(mu_);
            for (const auto& [id, job] : jobs_) list.push_back(job_to_json(job));
        }
        send_json(res, 200, {{"schema_version", kApiSchemaVersion}, {"jobs", list}});
    });

    srv.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto j = job(req.matches[1]);
        if (!j) return send_error(res, 404, "unknown job '" + req.matches[1].str() + "'");
        send_json(res, 200, job_to_json(*j));
    });

    srv.Get(R"(/api/jobs/([^/]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto j = job(req.matches[1]);
        if (!j) return send_error(res, 404, "unknown job '" + req.matches[1].str() + "'");
        if (j->status == JobStatus::Failed) return send_error(res, 409, "job failed: " + j->error);
        if (j->status != JobStatus::Done) return send_error(res, 409, "job is " + std::string(job_status_name(j->status)));
        const auto path = opt_.data_dir / "results" / (j->id + ".json");
        if (!fs::exists(path)) return send_error(res, 500, "result file missing");
        res.status = 200;
        res.set_content(read_file(path), "application/json");
    });

    srv.Delete(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::unique_lock lock(mu_);
        auto it = jobs_.find(req.matches[1]);
        if (it == jobs_.end()) return send_error(res, 404, "unknown job '" + req.matches[1].str() + "'");
        auto& job = it->second;
        if (job.status == JobStatus::Queued) {
            job.status = JobStatus::Failed;
            job.error = "cancelled";
            job.finished_at = now_s();
            queue_.erase(std::remove(queue_.begin(), queue_.end(), job.id), queue_.end());
            cancel_.erase(job.id);
            journal(job);
        } else if (job.status == JobStatus::Running) {
            if (auto c = cancel_.find(job.id); c != cancel_.end()) c->second->store(true);
        }
        send_json(res, 200, job_to_json(job));
    });

    srv.Post("/api/link", [this](const httplib::Request& req, httplib::Response& res) {
        struct Slot {
            std::atomic<int>& n;
            ~Slot() { --n; }
        };
        if (++links_in_flight_ > opt_.max_concurrent_links) {
            --links_in_flight_;
            return send_error(res, 503, "link capacity exceeded, retry later");
        }
        Slot slot{links_in_flight_};
        guarded(res, [&] {
            const auto t0 = std::chrono::steady_clock::now();
            auto body = parse_body(req);
            if (!body.contains("scene_id") || !body.contains("tx") || !body.contains("rx") || !body.contains("freq_hz"))
                throw HttpError(400, "link query needs scene_id, tx, rx and freq_hz");
            const auto profile = body.value("profile", std::string("online"));
            if (profile != "online" && profile != "custom")
                throw HttpError(400, "link queries accept the online or custom profile");
            const auto sc = scene(body.at("scene_id").get<std::string>());
            const auto tx = terminal_from(body.at("tx"), "tx");
            const auto rx = terminal_from(body.at("rx"), "rx");
            const auto cfg = engine_from(body, "online");
            const double f = body.at("freq_hz").get<double>();
            const double t = body.value("time_s", 0.0);
            for (const auto* term : {&tx, &rx})
                if (term->attached_object && *term->attached_object >= sc->dynamic_objects.size())
                    throw HttpError(400, "attached_object out of range");
            const auto r = simulate_link(*sc, tx, rx, f, cfg, t, opt_.library, 1);
            auto doc = json::parse(mpc_json(r));
            const auto pl = path_loss(r);
            doc["path_loss_db"] = pl ? json(*pl) : json(nullptr);
            doc["rsrp_dbm"] = pl ? json(tx.power_dbm - *pl) : json(nullptr);
            doc["ds_ns"] = rms_delay_spread(r) * 1e9;
            doc["compute_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            send_json(res, 200, doc);
        });
    });
}

bool Service::listen(const std::string& host, int port) { return server_->listen(host, port); }

int Service::start_background(const std::string& host) {
    const int port = server_->bind_to_any_port(host);
    if (port <= 0) throw std::runtime_error("cannot bind " + host);
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop() {
    server_->stop();
    if (listener_.joinable()) listener_.join();
}

}  // namespace chantwin
