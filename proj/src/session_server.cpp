#include "viasim/session_server.hpp"

#include "viasim/error.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace viasim {

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

constexpr std::size_t kControlCapacity = 256;
constexpr std::size_t kEventCapacity = 64;

struct ClientJoined {};
struct ClientLeft {};
using Event = std::variant<InboundMessage, ClientJoined, ClientLeft>;

// Inbound side: HandleInput is latest-wins, everything else is a bounded queue.
class Mailbox {
public:
    void push(Event e) {
        std::lock_guard lock(mutex_);
        if (const auto* msg = std::get_if<InboundMessage>(&e); msg && std::holds_alternative<HandleInput>(*msg)) {
            latest_input_ = std::get<HandleInput>(*msg);
            return;
        }
        // Inputs that arrived before a control message keep their place.
        flush_input_locked();
        if (control_.size() >= kControlCapacity) {
            control_.pop_front();
            ++dropped_;
        }
        control_.push_back(std::move(e));
    }

    std::deque<Event> drain() {
        std::lock_guard lock(mutex_);
        flush_input_locked();
        std::deque<Event> out;
        out.swap(control_);
        return out;
    }

    long dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    void flush_input_locked() {
        if (!latest_input_) return;
        if (control_.size() < kControlCapacity) control_.push_back(InboundMessage{*latest_input_});
        latest_input_.reset();
    }

    mutable std::mutex mutex_;
    std::optional<HandleInput> latest_input_;
    std::deque<Event> control_;
    long dropped_ = 0;
};

class Connection;

struct Hub {
    Mailbox mailbox;
    std::set<std::shared_ptr<Connection>> clients; // touched on the network thread only
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

    void run() {
        http::async_read(ws_.next_layer(), buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    void send_state(const std::string& text) {
        if (!open_) return;
        pending_state_ = text;
        write_next();
    }

    void send_event(const std::string& text) {
        if (!open_) return;
        if (events_.size() >= kEventCapacity) events_.pop_front();
        events_.push_back(text);
        write_next();
    }

    void close() {
        if (!open_) return;
        beast::error_code ec;
        ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ec);
        ws_.next_layer().socket().close(ec);
    }

private:
    void on_request(beast::error_code ec) {
        if (ec) return;
        if (request_.target() != "/session" || !websocket::is_upgrade(request_)) {
            auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found,
                                                                          request_.version());
            res->set(http::field::content_type, "text/plain");
            res->body() = "WebSocket endpoint is /session\n";
            res->prepare_payload();
            http::async_write(ws_.next_layer(), *res,
                              [self = shared_from_this(), res](beast::error_code, std::size_t) {
                                  beast::error_code ignored;
                                  self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ignored);
                              });
            return;
        }
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(request_, [self = shared_from_this()](beast::error_code accept_ec) {
            if (accept_ec) return;
            self->open_ = true;
            self->hub_.clients.insert(self);
            self->hub_.mailbox.push(ClientJoined{});
            self->read_next();
        });
    }

    void read_next() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->on_closed();
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            try {
                self->hub_.mailbox.push(parse_inbound(text));
            } catch (const Error& e) {
                self->send_event(to_json_text(OutboundMessage{ErrorMessage{0.0, e.what()}}));
            }
            self->read_next();
        });
    }

    void write_next() {
        if (writing_ || !open_) return;
        if (!events_.empty()) {
            current_ = std::move(events_.front());
            events_.pop_front();
        } else if (pending_state_) {
            current_ = std::move(*pending_state_);
            pending_state_.reset();
        } else {
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(asio::buffer(current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) return self->on_closed();
            self->write_next();
        });
    }

    void on_closed() {
        if (!open_) return;
        open_ = false;
        hub_.mailbox.push(ClientLeft{});
        hub_.clients.erase(shared_from_this());
    }

    websocket::stream<beast::tcp_stream> ws_;
    Hub& hub_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    std::optional<std::string> pending_state_;
    std::deque<std::string> events_;
    std::string current_;
    bool writing_ = false;
    bool open_ = false;
};

} // namespace

struct SessionServer::Impl {
    explicit Impl(ServerConfig c) : cfg(std::move(c)), acceptor(ioc) {}

    void accept_next() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Connection>(std::move(socket), hub)->run();
            accept_next();
        });
    }

    void simulate() {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration_cast<clock::duration>(
            std::chrono::duration<double>(cfg.session.params.plant.control_dt));
        auto next = clock::now();
        std::vector<OutboundMessage> out;
        while (!stopping.load()) {
            for (Event& e : hub.mailbox.drain()) {
                if (std::holds_alternative<ClientJoined>(e))
                    core->client_connected();
                else if (std::holds_alternative<ClientLeft>(e))
                    core->client_disconnected();
                else
                    core->handle(std::get<InboundMessage>(e), out);
            }
            core->tick(out);
            ticks.fetch_add(1);
            if (!out.empty()) dispatch(out);
            out.clear();
            if (cfg.duration > 0.0 && core->time() >= cfg.duration - 1e-9) break;
            if (cfg.paced) {
                next += period;
                const auto now = clock::now();
                if (now > next + std::chrono::milliseconds(100)) next = now; // fell far behind: resync
                std::this_thread::sleep_until(next);
            }
        }
        core->flush_recording();
        finished.store(true);
    }

    // Hands outbound messages to the network thread without waiting on it.
    void dispatch(const std::vector<OutboundMessage>& out) {
        std::optional<std::string> state;
        std::vector<std::string> events;
        for (const auto& m : out) {
            if (std::holds_alternative<StateUpdate>(m))
                state = to_json_text(m);
            else
                events.push_back(to_json_text(m));
        }
        asio::post(ioc, [this, state = std::move(state), events = std::move(events)] {
            for (const auto& c : hub.clients) {
                for (const auto& e : events) c->send_event(e);
                if (state) c->send_state(*state);
            }
        });
    }

    ServerConfig cfg;
    asio::io_context ioc;
    tcp::acceptor acceptor;
    Hub hub;
    std::unique_ptr<SessionCore> core;
    std::thread io_thread;
    std::thread sim_thread;
    std::atomic<bool> stopping{false};
    std::atomic<bool> finished{false};
    std::atomic<long> ticks{0};
    bool started = false;
};

SessionServer::SessionServer(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

SessionServer::~SessionServer() { stop(); }

unsigned short SessionServer::start() {
    Impl& s = *impl_;
    if (s.started) throw Error("session server already started");
    s.core = std::make_unique<SessionCore>(s.cfg.session);
    const tcp::endpoint endpoint(asio::ip::make_address(s.cfg.address), s.cfg.port);
    s.acceptor.open(endpoint.protocol());
    s.acceptor.set_option(asio::socket_base::reuse_address(true));
    s.acceptor.bind(endpoint);
    s.acceptor.listen();
    s.accept_next();
    s.started = true;
    s.io_thread = std::thread([&s] { s.ioc.run(); });
    s.sim_thread = std::thread([&s] { s.simulate(); });
    return s.acceptor.local_endpoint().port();
}

void SessionServer::wait() {
    if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
}

void SessionServer::stop() {
    Impl& s = *impl_;
    if (!s.started) return;
    s.stopping.store(true);
    if (s.sim_thread.joinable()) s.sim_thread.join();
    asio::post(s.ioc, [&s] {
        beast::error_code ec;
        s.acceptor.close(ec);
        for (const auto& c : s.hub.clients) c->close();
    });
    // Give the close handlers a moment, then end the network loop.
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    s.ioc.stop();
    if (s.io_thread.joinable()) s.io_thread.join();
    s.hub.clients.clear();
    s.started = false;
}

bool SessionServer::running() const { return impl_->started && !impl_->finished.load(); }

long SessionServer::ticks() const { return impl_->ticks.load(); }

long SessionServer::dropped_messages() const { return impl_->hub.mailbox.dropped(); }

void run_session(const ServerConfig& cfg, const std::atomic<bool>& stop_flag) {
    SessionServer server(cfg);
    const unsigned short port = server.start();
    std::cerr << "session: listening on ws://" << cfg.address << ':' << port << "/session\n";
    while (server.running() && !stop_flag.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
}

} // namespace viasim
