// Eigen first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "prosper/error.hpp"
#include "prosper/service.hpp"

#include "httplib.h"

namespace prosper {

namespace {

json error_body(const Error& e)
{
    return {{"error", std::string(errc_name(e.code()))}, {"message", e.what()}, {"subject", e.subject()}};
}

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, std::string("request body: ") + e.what());
    }
}

long revision_of(const json& body)
{
    if (!body.contains("revision") || !body.at("revision").is_number_integer()) {
        throw Error(Errc::InvalidArgument, "request needs an integer 'revision'", "revision");
    }
    return body.at("revision").get<long>();
}

std::string sse_frame(const std::string& event, const json& data)
{
    return "event: " + event + "\ndata: " + data.dump() + "\n\n";
}

/// Wraps a handler so library errors become JSON error responses.
template <class F>
httplib::Server::Handler guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_json(res, error_body(e), http_status(e.code()));
        } catch (const json::exception& e) {
            send_json(res, error_body(Error(Errc::InvalidArgument, e.what())), 400);
        } catch (const std::logic_error& e) {
            send_json(res, error_body(Error(Errc::InvalidArgument, e.what())), 400);
        }
    };
}

}  // namespace

int http_status(Errc code)
{
    switch (code) {
    case Errc::UnknownSession:
    case Errc::UnknownScenario: return 404;
    case Errc::RevisionConflict: return 409;
    case Errc::InfeasibleNoTrajectories:
    case Errc::TargetOutsideWorkspace:
    case Errc::PassiveStopTriggered: return 422;
    default: return 400;
    }
}

struct HttpService::Impl {
    httplib::Server server;
    SessionManager& sessions;
    std::string host;

    explicit Impl(SessionManager& s) : sessions(s) {}
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions))
{
    auto& srv = impl_->server;
    SessionManager& sm = sessions;
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, {{"status", "ok"}, {"version", kDocumentVersion}});
    });
    srv.Get("/scenarios", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, {{"scenarios", scenario_names()}});
    });
    srv.Get("/sessions", [&sm](const httplib::Request&, httplib::Response& res) {
        send_json(res, {{"sessions", sm.session_ids()}});
    });
    srv.Post("/sessions", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        send_json(res, sm.create_session(body.value("scenario", std::string("reference"))), 201);
    }));
    srv.Get(R"(/sessions/([^/]+))", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        send_json(res, sm.get_state(req.matches[1]));
    }));
    srv.Post(R"(/sessions/([^/]+)/mutations)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("op")) throw Error(Errc::InvalidArgument, "request needs an 'op' object", "op");
        send_json(res, sm.mutate(req.matches[1], revision_of(body), body.at("op")));
    }));
    srv.Post(R"(/sessions/([^/]+)/optimize)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const PlanMode mode = plan_mode_from_string(body.value("mode", std::string("grid")));
        send_json(res, sm.optimize(req.matches[1], revision_of(body), mode));
    }));
    srv.Get(R"(/sessions/([^/]+)/dose-slice)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        const std::string axis = req.has_param("axis") ? req.get_param_value("axis") : "z";
        if (axis.size() != 1) throw Error(Errc::InvalidArgument, "axis must be x, y or z", "axis");
        const double offset = req.has_param("offset") ? std::stod(req.get_param_value("offset")) : 0.0;
        const double resolution = req.has_param("resolution") ? std::stod(req.get_param_value("resolution")) : 1.0;
        send_json(res, sm.get_dose_slice(req.matches[1], axis[0], offset, resolution));
    }));
    srv.Post(R"(/sessions/([^/]+)/execute)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        send_json(res, json(sm.execute(req.matches[1])));
    }));
    // Event feed: one SSE frame per simulation event, then the trial result.
    srv.Get(R"(/sessions/([^/]+)/events)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        (void)sm.snapshot(id);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [&sm, id](std::size_t, httplib::DataSink& sink) {
            std::size_t seq = 0;
            try {
                const TrialResult r = sm.execute(id, [&](const SimEvent& e) {
                    json data = e;
                    data["seq"] = seq++;
                    const std::string frame = sse_frame(e.kind, data);
                    sink.write(frame.data(), frame.size());
                });
                json result = r;
                result["seq"] = seq;
                const std::string frame = sse_frame("result", result);
                sink.write(frame.data(), frame.size());
            } catch (const Error& e) {
                const std::string frame = sse_frame("error", error_body(e));
                sink.write(frame.data(), frame.size());
            }
            sink.done();
            return true;
        });
    }));
    srv.Get(R"(/sessions/([^/]+)/export)", guarded([&sm](const httplib::Request& req, httplib::Response& res) {
        send_json(res, sm.export_bundle(req.matches[1]));
    }));
}

HttpService::~HttpService() { stop(); }

bool HttpService::bind(const std::string& host, int port)
{
    impl_->host = host;
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host);
        return port_ > 0;
    }
    if (!impl_->server.bind_to_port(host, port)) return false;
    port_ = port;
    return true;
}

void HttpService::serve() { impl_->server.listen_after_bind(); }

void HttpService::stop()
{
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace prosper
