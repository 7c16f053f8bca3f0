#include "pedeval/annotate_server.hpp"

#include "pedeval/error.hpp"

#include <httplib.h>

#include <regex>

namespace pedeval {

using nlohmann::ordered_json;

namespace {

ApiResponse error_response(int status, std::string_view kind, const std::string& message) {
    return {status, {{"error", {{"kind", kind}, {"message", message}}}}};
}

ordered_json parse_body(const std::string& body) {
    try {
        auto j = ordered_json::parse(body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("request body is not JSON: ") + e.what());
    }
}

std::string body_string(const ordered_json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

Rating body_rating(const ordered_json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    // Ratings arrive as "0"/"1"/"2"/"NA" or as bare integers.
    const auto& v = j[key];
    std::optional<Rating> r;
    if (v.is_string()) r = rating_from_token(v.get<std::string>());
    if (v.is_number_integer()) r = rating_from_token(std::to_string(v.get<long long>()));
    if (!r) throw ValidationError(std::string("field '") + key + "' is not a rating (0, 1, 2 or NA)");
    return *r;
}

std::string rater_of(const ApiRequest& req, const ordered_json& body, const char* key) {
    if (body.contains(key)) return body_string(body, key);
    auto h = req.headers.find("x-rater-id");
    if (h != req.headers.end() && !h->second.empty()) return h->second;
    throw ValidationError(std::string("missing '") + key + "' (or X-Rater-Id header)");
}

ApiResponse route(AnnotationService& svc, const ApiRequest& req) {
    static const std::regex pair_re(R"(^/api/pairs/([^/]+)$)");
    static const std::regex resolve_re(R"(^/api/adjudication/([^/]+)/resolve$)");
    std::smatch m;

    if (req.method == "GET" && req.path == "/api/tasks/next") {
        std::string rater;
        if (auto q = req.query.find("rater"); q != req.query.end()) rater = q->second;
        if (rater.empty()) {
            if (auto h = req.headers.find("x-rater-id"); h != req.headers.end()) rater = h->second;
        }
        if (rater.empty()) throw ValidationError("missing 'rater' query parameter");
        auto t = svc.next_task(rater);
        return {200, {{"task", t ? ordered_json(*t) : ordered_json(nullptr)}}};
    }
    if (req.method == "POST" && req.path == "/api/ratings") {
        const auto body = parse_body(req.body);
        if (!body.contains("level") || !body["level"].is_number_integer()) {
            throw ValidationError("missing integer field 'level'");
        }
        const auto rec = svc.submit_rating(rater_of(req, body, "rater_id"), body_string(body, "pair_id"),
                                           level_from_index(body["level"].get<int>()), body_rating(body, "rating"));
        return {201, {{"record", rec}, {"task", svc.task(rec.pair_id)}}};
    }
    if (req.method == "GET" && req.path == "/api/progress") return {200, progress_json(svc.progress())};
    if (req.method == "GET" && req.path == "/api/agreement") return {200, milestone_json(svc.milestone_report())};
    if (req.method == "GET" && req.path == "/api/adjudication") {
        std::string assignee;
        if (auto q = req.query.find("assignee"); q != req.query.end()) assignee = q->second;
        ordered_json items = ordered_json::array();
        for (const auto& item : svc.adjudication_queue()) {
            if (assignee.empty() || item.assignee == assignee) items.push_back(item);
        }
        return {200, {{"items", std::move(items)}}};
    }
    if (req.method == "POST" && std::regex_match(req.path, m, resolve_re)) {
        const auto body = parse_body(req.body);
        std::optional<std::vector<Rating>> opinions;
        if (body.contains("opinions") && !body["opinions"].is_null()) {
            if (!body["opinions"].is_array()) throw ValidationError("'opinions' must be an array");
            opinions.emplace();
            for (const auto& o : body["opinions"]) opinions->push_back(body_rating({{"o", o}}, "o"));
        }
        const std::string id = m[1];
        try {
            const auto rec = svc.resolve(id, rater_of(req, body, "resolver_id"), body_rating(body, "rating"), opinions);
            return {200, {{"record", rec}}};
        } catch (const ValidationError& e) {
            auto r = error_response(422, "invalid", e.what());
            for (const auto& item : svc.adjudication_queue()) {
                if (item.id == id) r.body["needs_discussion"] = item.needs_discussion;
            }
            return r;
        }
    }
    if (req.method == "GET" && std::regex_match(req.path, m, pair_re)) return {200, svc.pair_bundle(m[1])};
    return error_response(404, "not_found", "no route for " + req.method + " " + req.path);
}

}  // namespace

ordered_json milestone_json(const MilestoneStatus& status) {
    if (const auto* p = std::get_if<MilestonePending>(&status)) {
        return {{"status", "pending"}, {"remaining", p->remaining}};
    }
    const auto& r = std::get<MilestoneReport>(status);
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json by_level = ordered_json::object();
    for (const auto& [level, v] : r.report.icc_by_level) by_level[std::to_string(level_index(level))] = opt(v);
    return {{"status", "ready"},
            {"pairs", r.pair_ids},
            {"icc", opt(r.report.icc)},
            {"n_items", r.report.n_items},
            {"frac_gt1", r.report.frac_gt1},
            {"frac_eq1", r.report.frac_eq1},
            {"na_conflicts", r.report.na_conflicts},
            {"icc_by_level", std::move(by_level)},
            {"icc_level_mean", opt(r.report.icc_level_mean)}};
}

ordered_json progress_json(const Progress& p) {
    ordered_json states = ordered_json::object();
    for (const auto& [s, n] : p.by_state) states[std::string(task_state_name(s))] = n;
    ordered_json raters = ordered_json::object();
    for (const auto& [r, n] : p.rated_by) raters[r] = n;
    return {{"tasks", p.tasks},
            {"completed_pairs", p.completed_pairs},
            {"states", std::move(states)},
            {"rated_by", std::move(raters)},
            {"queue_open", p.queue_open},
            {"queue_resolved", p.queue_resolved}};
}

ApiResponse handle_api(AnnotationService& service, const ApiRequest& req) {
    try {
        return route(service, req);
    } catch (const NotFoundError& e) {
        return error_response(404, "not_found", e.what());
    } catch (const ConflictError& e) {
        return error_response(409, "conflict", e.what());
    } catch (const ValidationError& e) {
        return error_response(422, "invalid", e.what());
    } catch (const PreconditionError& e) {
        return error_response(422, "precondition", e.what());
    } catch (const Error& e) {
        return error_response(500, "internal", e.what());
    }
}

struct AnnotationServer::Impl {
    explicit Impl(AnnotationService& s) : service(s) {}
    AnnotationService& service;
    httplib::Server server;
};

AnnotationServer::AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto adapt = [this](const httplib::Request& hreq, httplib::Response& hres) {
        ApiRequest req;
        req.method = hreq.method;
        req.path = hreq.path;
        for (const auto& [k, v] : hreq.params) req.query.emplace(k, v);
        for (const auto& [k, v] : hreq.headers) {
            std::string key = k;
            for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            req.headers.emplace(key, v);
        }
        req.body = hreq.body;
        const auto res = handle_api(impl_->service, req);
        hres.status = res.status;
        hres.set_content(res.body.dump(), "application/json");
    };
    impl_->server.Get(R"(/api/.*)", adapt);
    impl_->server.Post(R"(/api/.*)", adapt);
    if (static_dir && !impl_->server.set_mount_point("/", static_dir->string())) {
        throw NotFoundError("static directory " + static_dir->string() + " not found");
    }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw Error("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace pedeval
