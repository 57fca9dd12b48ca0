#!/usr/bin/env python3
"""Regenerates the small bundled benchmark corpus under data/corpus.

The datasets are seeded, desk-scale stand-ins shaped like common public
visualization datasets. Re-running this script produces identical files.
"""
import csv
import datetime as dt
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "corpus"


def write(name, header, rows):
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])


def cars(rng):
    makes = {
        "USA": ["chevrolet", "ford", "plymouth", "amc", "dodge", "buick"],
        "Europe": ["volkswagen", "peugeot", "audi", "volvo", "fiat"],
        "Japan": ["toyota", "datsun", "honda", "mazda", "subaru"],
    }
    models = ["malibu", "torino", "satellite", "rebel", "custom", "wagon",
              "coupe", "sedan", "deluxe", "gl"]
    rows = []
    for i in range(40):
        origin = ["USA", "USA", "Europe", "Japan"][i % 4]
        make = rng.choice(makes[origin])
        cyl = rng.choice([8, 8, 6, 4]) if origin == "USA" else rng.choice([4, 4, 4, 6])
        disp = {8: rng.randint(300, 455), 6: rng.randint(200, 258), 4: rng.randint(85, 140)}[cyl]
        hp = {8: rng.randint(140, 225), 6: rng.randint(88, 110), 4: rng.randint(46, 97)}[cyl]
        weight = {8: rng.randint(3400, 4700), 6: rng.randint(2800, 3400), 4: rng.randint(1800, 2800)}[cyl]
        mpg = round({8: rng.uniform(10, 18), 6: rng.uniform(16, 22), 4: rng.uniform(22, 36)}[cyl], 1)
        acc = round(rng.uniform(8.0, 21.0), 1)
        year = 1970 + (i % 13)
        if i in (5, 17):
            mpg = None
        if i == 29:
            hp = None
        rows.append([f"{make} {rng.choice(models)}", mpg, cyl, disp, hp, weight, acc,
                     f"{year}-01-01", origin])
    write("cars.csv", ["name", "mpg", "cylinders", "displacement", "hp", "weight",
                       "acceleration", "year", "origin"], rows)


def weather(rng):
    start = dt.date(2012, 1, 1)
    kinds = ["drizzle", "rain", "sun", "snow", "fog"]
    rows = []
    for i in range(60):
        d = start + dt.timedelta(days=i)
        tmax = round(rng.uniform(2, 16), 1)
        tmin = round(tmax - rng.uniform(2, 9), 1)
        precip = round(max(0.0, rng.gauss(3, 5)), 1)
        wind = round(rng.uniform(0.5, 8.5), 1)
        kind = "sun" if precip == 0.0 else rng.choice(kinds)
        if i == 11:
            wind = None
        rows.append([d.isoformat(), precip, tmax, tmin, wind, kind,
                     "true" if d.weekday() >= 5 else "false"])
    write("weather.csv", ["date", "precipitation", "temp_max", "temp_min", "wind",
                          "weather", "is_weekend"], rows)


def stocks(rng):
    base = {"MSFT": 39.8, "AMZN": 64.6, "IBM": 100.5, "GOOG": 102.4, "AAPL": 25.9}
    rows = []
    for sym, p in base.items():
        for m in range(12):
            p = round(p * rng.uniform(0.9, 1.12), 2)
            rows.append([sym, f"2004-{m + 1:02d}-01", p])
    write("stocks.csv", ["symbol", "date", "price"], rows)


def penguins(rng):
    spec = {
        "Adelie": ("Torgersen", 38.8, 18.3, 190, 3700),
        "Chinstrap": ("Dream", 48.8, 18.4, 196, 3730),
        "Gentoo": ("Biscoe", 47.5, 15.0, 217, 5076),
    }
    rows = []
    for i in range(45):
        sp = ["Adelie", "Chinstrap", "Gentoo"][i % 3]
        island, bl, bd, fl, bm = spec[sp]
        sex = rng.choice(["MALE", "FEMALE"])
        row = [sp, island, round(rng.gauss(bl, 2.5), 1), round(rng.gauss(bd, 1.0), 1),
               int(rng.gauss(fl, 6)), int(round(rng.gauss(bm, 350), -1)), sex]
        if i == 3:
            row[2:7] = [None] * 5
        if i in (8, 40):
            row[6] = None
        rows.append(row)
    write("penguins.csv", ["species", "island", "bill_length_mm", "bill_depth_mm",
                           "flipper_length_mm", "body_mass_g", "sex"], rows)


def gapminder(rng):
    countries = {
        "Afghanistan": (0, 8.9e6, 30.3, 7.7),
        "Argentina": (3, 17.8e6, 62.5, 3.2),
        "Bangladesh": (0, 46.9e6, 37.5, 6.8),
        "Brazil": (3, 53.9e6, 50.9, 6.2),
        "Japan": (4, 86.5e6, 63.0, 2.0),
        "Norway": (1, 3.3e6, 72.2, 2.8),
    }
    rows = []
    for year in range(1955, 1985, 5):
        k = (year - 1955) // 5
        for c, (cl, pop, life, fert) in countries.items():
            rows.append([year, c, cl, int(pop * (1.02 ** (5 * k)) * rng.uniform(0.98, 1.02)),
                         round(life + k * rng.uniform(1.0, 2.5), 2),
                         round(max(1.2, fert - k * rng.uniform(0.1, 0.5)), 2)])
    write("gapminder.csv", ["year", "country", "cluster", "pop", "life_expect", "fertility"], rows)


def main():
    rng = random.Random(20230315)
    cars(rng)
    weather(rng)
    stocks(rng)
    penguins(rng)
    gapminder(rng)


if __name__ == "__main__":
    main()
