// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// monosplat command-line driver.
//
// Exit codes: 0 success, 1 unexpected failure, 2 input error (bad flags,
// files, cameras or shapes), 3 numeric error (non-finite values, divergence,
// failed gradient checks).
#include <iostream>

#include "common.hpp"
#include "monosplat/geometry/camera.hpp"
#include "monosplat/numerics/mtf.hpp"

#ifdef MONOSPLAT_REAL_DOUBLE
#error "built against the f64 headers; link the f64 archive by file"
#endif

int main(int argc, char **argv) {
    using namespace monosplat;
    CLI::App app{"Feed-forward 3D Gaussian reconstruction from posed views"};
    app.require_subcommand(1);
    int status = cli::kExitOk;
    cli::register_reconstruct(app, status);
    cli::register_depth(app, status);
    cli::register_render(app, status);
    cli::register_fit(app, status);
    cli::register_synth(app, status);
    cli::register_bench(app, status);
    cli::register_gradcheck(app, status);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return cli::kExitInput;
    } catch (const NumericError &e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return cli::kExitNumeric;
    } catch (const std::invalid_argument &e) {
        std::cerr << "input error: " << e.what() << "\n";
        return cli::kExitInput;
    } catch (const FormatError &e) {
        std::cerr << "input error: " << e.what() << "\n";
        return cli::kExitInput;
    } catch (const GeometryError &e) {
        std::cerr << "input error: " << e.what() << "\n";
        return cli::kExitInput;
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "input error: " << e.what() << "\n";
        return cli::kExitInput;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return status;
}
