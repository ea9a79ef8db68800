#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedl/checkpoint.hpp"
#include "fedl/data.hpp"

using namespace fedl;

namespace {

struct temp_file {
    std::string path;
    explicit temp_file(const std::string& name) : path("/tmp/fedl_test_" + name) {}
    ~temp_file() { std::remove(path.c_str()); }
};

train_result quick_train(network_config& net, train_config& tc,
                         ablation_mode mode = ablation_mode::none) {
    synth_config sc;
    sc.k = 2;
    sc.n_per_class = 80;
    sc.seed = 3;
    const auto ds = synth_generate(sc);
    net.input_dim = 2;
    net.hidden_dims = {8};
    net.k = 2;
    net.ablation = mode;
    tc.max_epochs = 5;
    tc.seed = 17;
    std::ostringstream sink;
    return train(net, tc, ds, &sink);
}

}  // namespace

TEST_CASE("checkpoint roundtrip reproduces params, state, and forwards") {
    network_config net;
    train_config tc;
    const train_result res = quick_train(net, tc);
    const checkpoint ckpt = make_checkpoint(net, tc, res);

    temp_file f("roundtrip.ckpt");
    save_checkpoint(f.path, ckpt);
    const checkpoint back = load_checkpoint(f.path);

    REQUIRE(back.net_config.hidden_dims == net.hidden_dims);
    REQUIRE(back.train_cfg.learning_rate == tc.learning_rate);
    REQUIRE(back.best_epoch == res.history.best_epoch);
    REQUIRE(back.optimizer.step == res.optimizer.step);
    REQUIRE(back.optimizer.m == res.optimizer.m);
    REQUIRE(back.optimizer.v == res.optimizer.v);

    // bit-exact forward on a fresh batch
    rng gen(23);
    std::vector<std::vector<double>> batch(3, std::vector<double>(2));
    for (auto& row : batch)
        for (double& x : row) x = gen.normal();
    const auto a = forward(res.params, net, batch);
    const auto b = forward(back.params, back.net_config, batch);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].alpha == b[i].alpha);
        REQUIRE(a[i].p == b[i].p);
        REQUIRE(a[i].tau == b[i].tau);
    }
}

TEST_CASE("checkpoint records the ablation flag") {
    network_config net;
    train_config tc;
    const train_result res = quick_train(net, tc, ablation_mode::fix_tau);
    const checkpoint ckpt = make_checkpoint(net, tc, res);
    temp_file f("ablation.ckpt");
    save_checkpoint(f.path, ckpt);
    REQUIRE(load_checkpoint(f.path).net_config.ablation == ablation_mode::fix_tau);
}

TEST_CASE("checkpoint rejects future versions and corrupt payloads") {
    network_config net;
    train_config tc;
    const train_result res = quick_train(net, tc);
    temp_file f("tamper.ckpt");
    save_checkpoint(f.path, make_checkpoint(net, tc, res));

    // bump the version field (offset 8)
    {
        std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(8);
        const std::uint32_t future = 99;
        io.write(reinterpret_cast<const char*>(&future), 4);
    }
    REQUIRE_THROWS_WITH(load_checkpoint(f.path), Catch::Matchers::ContainsSubstring("version"));

    // restore, then flip one payload byte near the end
    save_checkpoint(f.path, make_checkpoint(net, tc, res));
    {
        std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekg(-9, std::ios::end);
        char byte = 0;
        io.read(&byte, 1);
        byte = static_cast<char>(byte ^ 0x5a);
        io.seekp(-9, std::ios::end);
        io.write(&byte, 1);
    }
    REQUIRE_THROWS_AS(load_checkpoint(f.path), checkpoint_error);

    // bad magic
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "NOTACKPTxxxxxxxxxxxxxxxx";
    }
    REQUIRE_THROWS_WITH(load_checkpoint(f.path), Catch::Matchers::ContainsSubstring("magic"));
}
