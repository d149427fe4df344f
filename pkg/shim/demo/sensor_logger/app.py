"""Demo appliance: read sensor samples, log them, print the average.

The log is written into the current working directory so test harnesses
can isolate runs.
"""

import os

APP_DIR = os.path.dirname(os.path.abspath(__file__))


def read_samples():
    with open(os.path.join(APP_DIR, "sensor_input.txt")) as fh:
        return [float(line) for line in fh if line.strip()]


def average(samples):
    return sum(samples) / len(samples)


def write_log(samples, mean):
    with open(os.path.join(os.getcwd(), "readings.log"), "w") as fh:
        for sample in samples:
            fh.write(f"sample {sample:.2f}\n")
        fh.write(f"mean {mean:.3f}\n")


def main():
    samples = read_samples()
    mean = average(samples)
    write_log(samples, mean)
    print(f"{len(samples)} samples, mean {mean:.3f}")


if __name__ == "__main__":
    main()
