import sys
import textwrap

import pytest


def write_script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return [sys.executable, str(path)]


@pytest.fixture
def echo_command(tmp_path):
    return write_script(tmp_path, "echo_sim.py", """
        import sys
        for line in sys.stdin:
            line = line.strip()
            if line == "DIM?":
                print(2, flush=True)
            else:
                print(line, flush=True)
    """)


@pytest.fixture
def example1_command(tmp_path):
    # deliberately independent of the package: plain floats, own formatting
    return write_script(tmp_path, "example1_sim.py", """
        import sys
        for line in sys.stdin:
            line = line.strip()
            if line == "DIM?":
                print(2, flush=True)
                continue
            x1, x2 = (float(v) for v in line.split())
            y1 = 2.0 * (x1 * x1) + x2
            y2 = -2.0 * (y1 * y1) - 0.8 * x1
            print(repr(y1), repr(y2), flush=True)
    """)


@pytest.fixture
def three_numbers_command(tmp_path):
    return write_script(tmp_path, "bad_dim_sim.py", """
        import sys
        for line in sys.stdin:
            line = line.strip()
            print(2 if line == "DIM?" else "1.0 2.0 3.0", flush=True)
    """)


@pytest.fixture
def garbage_command(tmp_path):
    return write_script(tmp_path, "garbage_sim.py", """
        import sys
        for line in sys.stdin:
            line = line.strip()
            print(2 if line == "DIM?" else "one two", flush=True)
    """)


@pytest.fixture
def dying_command(tmp_path):
    return write_script(tmp_path, "dying_sim.py", """
        import sys
        line = sys.stdin.readline()
        print(2, flush=True)
        sys.stdin.readline()
        sys.exit(5)
    """)
