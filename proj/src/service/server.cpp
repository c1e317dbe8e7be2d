#include "opra/service.hpp"

#include <httplib.h>

#include <sstream>

namespace opra {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::optional<std::string> param(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    return req.get_param_value(key);
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    try {
        const auto n = std::stoll(v, &used);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw HttpError(400, "query parameter " + key + " is not an integer: " + v);
}

std::int64_t required_int(const httplib::Request& req, const char* key) {
    const auto v = param(req, key);
    if (!v) throw HttpError(400, std::string("missing query parameter ") + key);
    return to_int(key, *v);
}

std::optional<Concept> optional_concept(const httplib::Request& req) {
    const auto v = param(req, "concept");
    if (!v) return std::nullopt;
    return require_concept(*v);
}

Concept required_concept(const httplib::Request& req) {
    const auto c = optional_concept(req);
    if (!c) throw HttpError(400, "missing query parameter concept");
    return *c;
}

bool flag(const httplib::Request& req, const char* key) {
    const auto v = param(req, key);
    return v && (*v == "1" || *v == "true" || *v == "yes");
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw HttpError(400, std::string("body is not JSON: ") + e.what());
    }
}

using Handler = std::function<json(const httplib::Request&)>;

httplib::Server::Handler wrap(Handler h, int ok_status = 200) {
    return [h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, h(req), ok_status);
        } catch (const HttpError& e) {
            send_json(res, {{"error", e.what()}}, e.status());
        } catch (const Error& e) {
            send_json(res, {{"error", e.what()}}, 400);
        } catch (const std::exception& e) {
            send_json(res, {{"error", e.what()}}, 500);
        }
    };
}

}  // namespace

void register_routes(httplib::Server& server, Workspace& ws) {
    server.Get("/health", wrap([](const auto&) { return json{{"status", "ok"}}; }));

    server.Get("/layout", wrap([&ws](const httplib::Request& req) {
        const auto scale = param(req, "scale");
        std::optional<std::size_t> bins;
        if (const auto b = param(req, "bins")) {
            const auto n = to_int("bins", *b);
            if (n <= 0) throw HttpError(400, "bins must be positive");
            bins = static_cast<std::size_t>(n);
        }
        return ws.get_layout(optional_concept(req), scale ? parse_scale(*scale) : HistogramScale::linear, bins);
    }));

    server.Put("/filter", wrap([&ws](const httplib::Request& req) { return ws.put_filter(parse_body(req)); }));
    server.Get("/filter", wrap([&ws](const auto&) { return ws.get_filter(); }));

    server.Get("/table", wrap([&ws](const httplib::Request& req) {
        const auto order = param(req, "order").value_or("asc");
        if (order != "asc" && order != "desc") throw HttpError(400, "order must be asc or desc");
        return ws.get_table(param(req, "sort").value_or("id"), order == "desc", flag(req, "include_excluded"));
    }));
    server.Post("/table/exclude", wrap([&ws](const httplib::Request& req) { return ws.post_exclude(parse_body(req)); }));

    server.Get("/clouds", wrap([&ws](const httplib::Request& req) {
        std::vector<std::int64_t> selected;
        if (const auto s = param(req, "selected")) {
            std::stringstream ss(*s);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) selected.push_back(to_int("selected", item));
        }
        return ws.get_clouds(required_concept(req), selected);
    }));

    server.Get("/reasoning", wrap([&ws](const httplib::Request& req) {
        std::optional<std::size_t> generated;
        if (const auto g = param(req, "generated")) {
            const auto n = to_int("generated", *g);
            if (n < 0) throw HttpError(400, "generated must be a sentence id");
            generated = static_cast<std::size_t>(n);
        }
        return ws.get_reasoning(required_int(req, "sentence"), required_concept(req), generated);
    }));

    server.Get("/template", wrap([&ws](const httplib::Request& req) {
        const auto s = param(req, "strategy");
        std::optional<std::int64_t> version;
        if (const auto v = param(req, "version")) version = to_int("version", *v);
        return ws.get_template(required_concept(req), s ? parse_strategy(*s) : Strategy::cot_cr, version);
    }));
    server.Post("/template/edit",
                wrap([&ws](const httplib::Request& req) { return ws.post_template_edit(parse_body(req)); }));

    server.Post("/assess", wrap([&ws](const httplib::Request& req) { return ws.post_assess(parse_body(req)); }));
    server.Post("/reassess",
                wrap([&ws](const httplib::Request& req) { return ws.post_reassess(parse_body(req)); }, 202));
    server.Get(R"(/job/(\d+))", wrap([&ws](const httplib::Request& req) {
        return ws.get_job(to_int("job", req.matches[1].str()));
    }));
}

void serve(Workspace& ws, const std::string& host, int port) {
    httplib::Server server;
    register_routes(server, ws);
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace opra
