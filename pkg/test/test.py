#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import argparse
import logging
import os
import sys

import pytest

TEST_DIR = os.path.dirname(os.path.abspath(__file__))


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    parser = argparse.ArgumentParser(description="CIM simulator test runner.")
    parser.add_argument("--test", help="Test suite to run")
    parser.add_argument("-k", dest="keyword", help="Only run tests matching this pytest keyword expression")
    args = parser.parse_args()

    tests = {
        "ISA": "test_isa.py",
        "Macro": "test_macro.py",
        "Memory": "test_memory.py",
        "Core": "test_core.py",
        "Compiler": "test_compiler.py",
        "KWS": "test_kws.py",
        "CLI": "test_cli.py",
        "Image Helpers": "test_image_helpers.py",
    }

    test_runners = tests
    if args.test:
        test_runners = {name: test for (name, test) in test_runners.items() if name == args.test}

    if len(test_runners) == 0:
        logging.error("Error: No tests to run. Known tests: {}".format([name for name, test in tests.items()]))
        sys.exit(1)

    failed = []
    for name, test in test_runners.items():
        logging.info("Running Test: {}".format(name))
        pytest_args = [os.path.join(TEST_DIR, test), "-q"]
        if args.keyword:
            pytest_args += ["-k", args.keyword]
        if pytest.main(pytest_args) not in (pytest.ExitCode.OK, pytest.ExitCode.NO_TESTS_COLLECTED):
            failed.append(name)
        logging.info("Finished Test: {}".format(name))

    if failed:
        logging.error("Failed tests: {}".format(failed))
        sys.exit(1)
