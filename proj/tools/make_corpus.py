#!/usr/bin/env python3
"""Writes small synthetic five-sentence story corpora and a word-vector table.

    python3 tools/make_corpus.py tests/data

produces toy_stories.csv (32 stories), desk_stories.csv (200 stories),
desk_val.csv (40 stories) and word_vectors.txt. Output is deterministic.
"""

import csv
import random
import sys
import uuid
from pathlib import Path

NAMES = ["anna", "ben", "carla", "dev", "eli", "fay", "gus", "hana", "ivan", "jo",
         "kemal", "lena", "milo", "nora", "omar", "pia", "quinn", "rosa", "sam", "tess"]
PLACES = ["the park", "the lake", "school", "the store", "the beach", "the library",
          "the farm", "the city", "the gym", "the market"]
OBJECTS = ["a kite", "a puppy", "a guitar", "a bike", "a cake", "a book", "a ball",
           "a camera", "a plant", "a hat"]
FEELINGS = ["happy", "proud", "tired", "excited", "calm", "nervous", "grateful", "relieved"]
ACTIONS = ["practiced every day", "asked a friend for help", "saved some money",
           "read the instructions", "tried again", "made a plan", "waited patiently",
           "called home"]
ENDINGS = [
    "{name} felt {feeling} and smiled at {obj}.",
    "in the end , {name} kept {obj} forever.",
    "{name} went back to {place} the next day.",
    "{name} was {feeling} that it worked out.",
    "finally {name} shared {obj} with everyone.",
]


def story(rng, idx):
    name = rng.choice(NAMES)
    friend = rng.choice([n for n in NAMES if n != name])
    place = rng.choice(PLACES)
    obj = rng.choice(OBJECTS)
    feeling = rng.choice(FEELINGS)
    action = rng.choice(ACTIONS)
    # A rare, story-specific word so copying from the plot matters.
    rare = "".join(rng.choice("bcdfghklmnprstvz") + rng.choice("aeiou") for _ in range(3))
    s1 = f"{name.capitalize()} went to {place} with {friend.capitalize()}."
    s2 = f"{name.capitalize()} wanted {obj} named {rare}."
    s3 = f"{name.capitalize()} {action}."
    s4 = f"{friend.capitalize()} said it was a good idea."
    ending = rng.choice(ENDINGS).format(name=name, feeling=feeling, obj=rare, place=place)
    ending = ending[0].upper() + ending[1:]
    sid = str(uuid.UUID(int=rng.getrandbits(128)))
    return [sid, f"story {idx}", s1, s2, s3, s4, ending]


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["storyid", "storytitle", "sentence1", "sentence2", "sentence3", "sentence4", "sentence5"])
        w.writerows(rows)


def write_vectors(path, rng, dim=8):
    words = set()
    for group in (NAMES, FEELINGS):
        words.update(group)
    for phrase in PLACES + OBJECTS + ACTIONS + ENDINGS:
        words.update(w for w in phrase.replace("{", " ").replace("}", " ").replace(".", " ").split())
    words.update([".", ",", "the", "a", "and", "was", "went", "to", "with"])
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(words)} {dim}\n")
        for w in sorted(words):
            vec = " ".join(f"{rng.uniform(-1, 1):.6f}" for _ in range(dim))
            f.write(f"{w} {vec}\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "toy_stories.csv", [story(random.Random(1000 + i), i) for i in range(32)])
    write_csv(out / "desk_stories.csv", [story(random.Random(5000 + i), i) for i in range(200)])
    write_csv(out / "desk_val.csv", [story(random.Random(9000 + i), i) for i in range(40)])
    write_vectors(out / "word_vectors.txt", random.Random(7))


if __name__ == "__main__":
    main()
