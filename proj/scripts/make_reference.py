#!/usr/bin/env python3
"""Synthetic full-size GPT-2 Small checkpoint plus reference outputs.

The checkpoint is random but deterministic (numpy PCG64 with a fixed seed), so
it can be rebuilt anywhere instead of being stored. Weight scales are chosen so
attention is peaked and final logits have clear top-1 margins.

    make_reference.py --out DIR            write DIR/model.safetensors + config.json
    make_reference.py --out DIR --freeze   also run the Hugging Face GPT-2 on
                                           data/reference/prompts.txt and write
                                           expected.json + final_logits.safetensors
"""

import argparse
import hashlib
import json
import pathlib

import numpy as np
from safetensors.numpy import save_file

ROOT = pathlib.Path(__file__).resolve().parent.parent
REF_DIR = ROOT / "data" / "reference"
SEED = 20240611

CONFIG = {
    "model_type": "gpt2",
    "n_layer": 12,
    "n_head": 12,
    "n_embd": 768,
    "n_inner": None,
    "n_positions": 1024,
    "n_ctx": 1024,
    "vocab_size": 50257,
    "layer_norm_epsilon": 1e-5,
    "activation_function": "gelu_new",
}


def build_tensors():
    rng = np.random.default_rng(SEED)
    d, v, ctx, layers = 768, 50257, 1024, 12

    def normal(shape, std):
        return (rng.standard_normal(shape, dtype=np.float32) * np.float32(std)).astype(np.float32)

    def gain(n):
        return (1.0 + normal((n,), 0.1)).astype(np.float32)

    t = {
        "wte.weight": normal((v, d), 0.1),
        "wpe.weight": normal((ctx, d), 0.02),
        "ln_f.weight": gain(d),
        "ln_f.bias": normal((d,), 0.05),
    }
    for i in range(layers):
        p = f"h.{i}."
        t[p + "ln_1.weight"] = gain(d)
        t[p + "ln_1.bias"] = normal((d,), 0.05)
        t[p + "attn.c_attn.weight"] = normal((d, 3 * d), 0.05)
        t[p + "attn.c_attn.bias"] = normal((3 * d,), 0.02)
        t[p + "attn.c_proj.weight"] = normal((d, d), 0.05)
        t[p + "attn.c_proj.bias"] = normal((d,), 0.02)
        t[p + "ln_2.weight"] = gain(d)
        t[p + "ln_2.bias"] = normal((d,), 0.05)
        t[p + "mlp.c_fc.weight"] = normal((d, 4 * d), 0.05)
        t[p + "mlp.c_fc.bias"] = normal((4 * d,), 0.02)
        t[p + "mlp.c_proj.weight"] = normal((4 * d, d), 0.02)
        t[p + "mlp.c_proj.bias"] = normal((d,), 0.02)
    return t


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def freeze(tensors, checkpoint_sha):
    import torch
    from transformers import GPT2Config, GPT2LMHeadModel, GPT2Tokenizer

    tok = GPT2Tokenizer(str(ROOT / "data/gpt2/vocab.json"), str(ROOT / "data/gpt2/merges.txt"))
    cfg = GPT2Config(**{k: v for k, v in CONFIG.items() if k != "model_type"})
    cfg._attn_implementation = "eager"
    model = GPT2LMHeadModel(cfg).eval()
    state = {"transformer." + k: torch.from_numpy(v) for k, v in tensors.items()}
    state["lm_head.weight"] = state["transformer.wte.weight"]
    missing, unexpected = model.load_state_dict(state, strict=False)
    assert not unexpected, unexpected
    assert all(".attn.bias" in m or ".attn.masked_bias" in m for m in missing), missing

    prompts = (REF_DIR / "prompts.txt").read_text(encoding="utf-8").splitlines()
    rows, entries = [], []
    with torch.no_grad():
        for text in prompts:
            ids = tok.encode(text)
            logits = model(torch.tensor([ids])).logits[0, -1].numpy().astype(np.float32)
            order = np.argsort(-logits)
            rows.append(logits)
            entries.append({
                "text": text,
                "ids": ids,
                "top1": int(order[0]),
                "top1_margin": float(logits[order[0]] - logits[order[1]]),
            })
    save_file({"logits": np.stack(rows)}, str(REF_DIR / "final_logits.safetensors"))
    with open(REF_DIR / "expected.json", "w", encoding="utf-8") as f:
        json.dump({"checkpoint_sha256": checkpoint_sha, "seed": SEED, "prompts": entries},
                  f, ensure_ascii=False, indent=1)
        f.write("\n")
    print("min top-1 margin:", min(e["top1_margin"] for e in entries))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, type=pathlib.Path)
    ap.add_argument("--freeze", action="store_true")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    tensors = build_tensors()
    ckpt = args.out / "model.safetensors"
    save_file(tensors, str(ckpt), metadata={"format": "pt"})
    (args.out / "config.json").write_text(json.dumps(CONFIG, indent=1) + "\n")
    digest = sha256(ckpt)
    print(ckpt, digest)
    if args.freeze:
        freeze(tensors, digest)


if __name__ == "__main__":
    main()
