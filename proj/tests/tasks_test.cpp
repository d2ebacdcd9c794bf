#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "eunn/tasks.hpp"
#include "support.hpp"

using namespace eunn;

TEST_CASE("copy_batch reproduces the documented layout") {
    // T=20, M=5, n=3: 30 input steps, recall marker at 1-based position 25
    CopyTaskConfig cfg{.n_symbols = 3, .m_len = 5, .t_delay = 20, .batch = 2};
    Rng rng(1);
    const SequenceBatch batch = copy_batch(cfg, rng);
    CHECK(batch.t_len == 30);
    CHECK(batch.n_in == 5);  // 3 data symbols + blank + start
    CHECK(batch.mask_count() == 30 * 2);

    for (std::size_t item = 0; item < 2; ++item) {
        // data head: one-hot over data symbols
        for (std::size_t t = 0; t < 5; ++t) {
            const double* x = batch.input_at(t, item);
            double sum = 0.0;
            for (std::size_t k = 0; k < 5; ++k) sum += x[k];
            CHECK(sum == 1.0);
            CHECK(x[cfg.blank()] == 0.0);
            CHECK(x[cfg.start_recall()] == 0.0);
        }
        // blanks, then the start marker at 0-based step 24
        for (std::size_t t = 5; t < 24; ++t)
            CHECK(batch.input_at(t, item)[cfg.blank()] == 1.0);
        CHECK(batch.input_at(24, item)[cfg.start_recall()] == 1.0);
        for (std::size_t t = 25; t < 30; ++t)
            CHECK(batch.input_at(t, item)[cfg.blank()] == 1.0);

        // targets: blanks for T+M steps, then the data
        for (std::size_t t = 0; t < 25; ++t)
            CHECK(batch.target_i_at(t, item) == int(cfg.blank()));
        for (std::size_t t = 25; t < 30; ++t) {
            const int sym = batch.target_i_at(t, item);
            CHECK(sym >= 0);
            CHECK(sym < 3);
            // the target is the data symbol shifted by T+M
            const double* x = batch.input_at(t - 25, item);
            CHECK(x[sym] == 1.0);
        }
    }
}

TEST_CASE("copy_batch smallest instance") {
    CopyTaskConfig cfg{.n_symbols = 2, .m_len = 1, .t_delay = 1, .batch = 1};
    Rng rng(2);
    const SequenceBatch b = copy_batch(cfg, rng);
    CHECK(b.t_len == 3);         // M + (T-1) + start + M = 1 + 0 + 1 + 1
    CHECK(b.n_in == 4);
    // step 0: data; step 1: start marker (T-1 = 0 blanks); step 2: blank
    CHECK(b.input_at(1, 0)[cfg.start_recall()] == 1.0);
    CHECK(b.input_at(2, 0)[cfg.blank()] == 1.0);
    CHECK(b.target_i_at(0, 0) == int(cfg.blank()));
    CHECK(b.target_i_at(1, 0) == int(cfg.blank()));
    const int sym = b.target_i_at(2, 0);
    CHECK(b.input_at(0, 0)[sym] == 1.0);
}

TEST_CASE("copy_batch symbol frequencies are uniform within 3 sigma") {
    CopyTaskConfig cfg{.n_symbols = 4, .m_len = 5, .t_delay = 2, .batch = 50};
    Rng rng(3);
    std::vector<std::size_t> counts(4, 0);
    std::size_t total = 0;
    for (int rep = 0; rep < 400; ++rep) {  // 400 * 50 * 5 = 1e5 symbols
        const SequenceBatch b = copy_batch(cfg, rng);
        for (std::size_t item = 0; item < cfg.batch; ++item)
            for (std::size_t t = 0; t < cfg.m_len; ++t) {
                const double* x = b.input_at(t, item);
                for (std::size_t k = 0; k < 4; ++k)
                    if (x[k] == 1.0) {
                        ++counts[k];
                        ++total;
                    }
            }
    }
    CHECK(total == 100000);
    const double p = 0.25;
    const double sigma = std::sqrt(double(total) * p * (1 - p));
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(std::fabs(double(counts[k]) - double(total) * p) < 3.0 * sigma);
}

TEST_CASE("memoryless baseline formula") {
    CHECK(memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 1000}) ==
          doctest::Approx(10.0 * std::log(8.0) / 1020.0).epsilon(1e-15));
    CHECK(memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 1000}) ==
          doctest::Approx(0.0203867).epsilon(1e-4));
    CHECK(memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 100}) ==
          doctest::Approx(0.173287).epsilon(1e-4));
    // degenerate alphabet: nothing to remember
    CHECK(memoryless_baseline({.n_symbols = 1, .m_len = 10, .t_delay = 100}) == 0.0);

    // monotonicity: decreasing in T, increasing in M and n
    CHECK(memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 200}) <
          memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 100}));
    CHECK(memoryless_baseline({.n_symbols = 8, .m_len = 20, .t_delay = 100}) >
          memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 100}));
    CHECK(memoryless_baseline({.n_symbols = 16, .m_len = 10, .t_delay = 100}) >
          memoryless_baseline({.n_symbols = 8, .m_len = 10, .t_delay = 100}));
}

TEST_CASE("copy-task targets are a deterministic shift of the inputs") {
    CopyTaskConfig cfg{.n_symbols = 5, .m_len = 4, .t_delay = 7, .batch = 6};
    Rng rng(5);
    const SequenceBatch b = copy_batch(cfg, rng);
    const std::size_t shift = cfg.t_delay + cfg.m_len;
    for (std::size_t item = 0; item < cfg.batch; ++item)
        for (std::size_t t = 0; t < cfg.m_len; ++t) {
            const int sym = b.target_i_at(t + shift, item);
            CHECK(b.input_at(t, item)[sym] == 1.0);
        }
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("eunn_test_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

TEST_CASE("idx parsing round-trips and validates") {
    TempDir dir;
    const std::string img = (dir.path / "img").string();
    const std::string lab = (dir.path / "lab").string();
    std::vector<std::uint8_t> pixels(3 * 28 * 28);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = std::uint8_t(i % 251);
    testsup::write_idx_images(img, pixels, 3, 28, 28);
    testsup::write_idx_labels(lab, {7, 0, 9});

    const IdxData images = read_idx(img, 0x00000803);
    CHECK(images.dims == std::vector<std::uint32_t>{3, 28, 28});
    CHECK(images.bytes == pixels);
    const IdxData labels = read_idx(lab, 0x00000801);
    CHECK(labels.bytes == std::vector<std::uint8_t>{7, 0, 9});

    // wrong magic
    CHECK_THROWS_AS(read_idx(img, 0x00000801), IngestionError);
    // missing file
    CHECK_THROWS_AS(read_idx((dir.path / "nope").string(), 0x00000803), IngestionError);
    // truncated payload
    {
        std::ofstream out((dir.path / "trunc").string(), std::ios::binary);
        out.write("\x00\x00\x08\x03", 4);
        out.write("\x00\x00\x00\x02", 4);
        out.write("\x00\x00\x00\x1c", 4);
        out.write("\x00\x00\x00\x1c", 4);
        out.write("xy", 2);
    }
    CHECK_THROWS_AS(read_idx((dir.path / "trunc").string(), 0x00000803), IngestionError);
}

TEST_CASE("mnist task builds permuted pixel sequences") {
    TempDir dir;
    testsup::make_synthetic_digits(dir.path.string(), 64, 16, 11);
    MnistConfig cfg;
    cfg.train_images = (dir.path / "train-images-idx3-ubyte").string();
    cfg.train_labels = (dir.path / "train-labels-idx1-ubyte").string();
    cfg.test_images = (dir.path / "t10k-images-idx3-ubyte").string();
    cfg.test_labels = (dir.path / "t10k-labels-idx1-ubyte").string();
    cfg.subset = 48;
    cfg.val_size = 16;
    cfg.permutation_seed = 5;
    const MnistTask task(cfg);
    CHECK(task.seq_len() == 784);
    CHECK(task.train_count() == 48);

    // permutation is a bijection
    std::vector<char> seen(784, 0);
    for (std::size_t i : task.permutation()) {
        CHECK(!seen[i]);
        seen[i] = 1;
    }

    // same seed, same permutation
    const MnistTask task2(cfg);
    CHECK(task.permutation() == task2.permutation());

    Rng rng(1);
    const SequenceBatch b = task.sample_train(4, rng);
    CHECK(b.t_len == 784);
    CHECK(b.n_in == 1);
    CHECK(b.mask_count() == 4);  // final step only
    for (std::size_t t = 0; t < 784; ++t)
        for (std::size_t item = 0; item < 4; ++item) {
            CHECK(b.inputs[t * 4 + item] >= 0.0);
            CHECK(b.inputs[t * 4 + item] <= 1.0);
            CHECK(b.masked(t, item) == (t == 783));
        }

    const auto val = task.val_batches(8);
    std::size_t val_total = 0;
    for (const auto& vb : val) val_total += vb.batch;
    CHECK(val_total == 16);

    const auto test = task.test_batches(8);
    std::size_t test_total = 0;
    for (const auto& tb : test) test_total += tb.batch;
    CHECK(test_total == 16);
}

TEST_CASE("mnist downsampling averages blocks") {
    TempDir dir;
    // constant image: every downsampled pixel equals the constant
    std::vector<std::uint8_t> pixels(28 * 28, 102);
    testsup::write_idx_images((dir.path / "img").string(), pixels, 1, 28, 28);
    testsup::write_idx_labels((dir.path / "lab").string(), {3});
    MnistConfig cfg;
    cfg.train_images = (dir.path / "img").string();
    cfg.train_labels = (dir.path / "lab").string();
    cfg.subset = 1;
    cfg.val_size = 0;
    cfg.downsample = 2;
    const MnistTask task(cfg);
    CHECK(task.seq_len() == 196);
    Rng rng(1);
    const SequenceBatch b = task.sample_train(1, rng);
    for (std::size_t t = 0; t < 196; ++t)
        CHECK(b.inputs[t] == doctest::Approx(102.0 / 255.0).epsilon(1e-12));
    CHECK(b.target_i_at(195, 0) == 3);
}

TEST_CASE("mnist config validation") {
    MnistConfig cfg;
    cfg.train_images = "/nonexistent/file";
    cfg.train_labels = "/nonexistent/file";
    CHECK_THROWS_AS(MnistTask{cfg}, IngestionError);

    TempDir dir;
    testsup::make_synthetic_digits(dir.path.string(), 8, 4, 3);
    MnistConfig bad;
    bad.train_images = (dir.path / "train-images-idx3-ubyte").string();
    bad.train_labels = (dir.path / "train-labels-idx1-ubyte").string();
    bad.subset = 8;
    bad.val_size = 8;  // overlaps the subset
    CHECK_THROWS_AS(MnistTask{bad}, ConfigError);
    bad.val_size = 0;
    bad.downsample = 3;  // does not divide 28
    CHECK_THROWS_AS(MnistTask{bad}, ConfigError);
}
