#!/usr/bin/env python3
"""Populate a crackbench weight store from torchvision or Keras checkpoints.

VGG19, ResNet50 and InceptionV3 use torchvision's parameter names, so their
state dicts only lose the classifier entries. EfficientNetV2 (B0) is mapped
from a Keras EfficientNetV2B0 model layer by layer.

    convert_weights.py --out weights                       # torchvision ImageNet weights
    convert_weights.py --out weights --keras-b0 b0.h5      # plus EfficientNetV2 from Keras
    convert_weights.py --out w --random --reference-input ref.pt

With --random the architectures are seed-initialized instead of downloaded.
--reference-input additionally stores, per backbone, a fixed input batch and
the pooled features torchvision computes for it, which the C++ test suite
uses to check forward-pass equivalence.
"""

import argparse
import pathlib
import sys

import torch
import torchvision

TORCHVISION = {
    "VGG19": (torchvision.models.vgg19, "VGG19_Weights", ("classifier.",), 224),
    "ResNet50": (torchvision.models.resnet50, "ResNet50_Weights", ("fc.",), 224),
    "InceptionV3": (torchvision.models.inception_v3, "Inception_V3_Weights",
                    ("fc.", "AuxLogits."), 299),
}


def build_torchvision(name, random):
    ctor, weights_enum, _, _ = TORCHVISION[name]
    if random:
        kwargs = {"weights": None}
        if name == "InceptionV3":
            kwargs.update(aux_logits=False, init_weights=True)
        return ctor(**kwargs)
    weights = getattr(torchvision.models, weights_enum).DEFAULT
    return ctor(weights=weights)


def backbone_state(name, model):
    strip = TORCHVISION[name][2]
    return {k: v.detach().clone() for k, v in model.state_dict().items()
            if not k.startswith(strip)}


def pooled_features(name, model, x):
    model.eval()
    with torch.no_grad():
        if name == "VGG19":
            fmap = model.features(x)
        elif name == "ResNet50":
            m = model
            y = m.maxpool(m.relu(m.bn1(m.conv1(x))))
            fmap = m.layer4(m.layer3(m.layer2(m.layer1(y))))
        else:
            m = model
            if m.transform_input:
                raise SystemExit("reference features need transform_input=False")
            y = m.Conv2d_1a_3x3(x)
            y = m.Conv2d_2a_3x3(y)
            y = m.Conv2d_2b_3x3(y)
            y = m.maxpool1(y)
            y = m.Conv2d_3b_1x1(y)
            y = m.Conv2d_4a_3x3(y)
            y = m.maxpool2(y)
            for block in ("Mixed_5b", "Mixed_5c", "Mixed_5d", "Mixed_6a", "Mixed_6b",
                          "Mixed_6c", "Mixed_6d", "Mixed_6e", "Mixed_7a", "Mixed_7b",
                          "Mixed_7c"):
                y = getattr(m, block)(y)
            fmap = y
    return fmap.mean(dim=(2, 3))


# Module order of the C++ EfficientNetV2-B0: stem, blocks in sequence (each
# expand, depthwise, se.reduce, se.expand, project when present), top.
_PART_ORDER = {"expand": 0, "depthwise": 1, "se": 2, "project": 3}
_LEAF_ORDER = {"conv": 0, "reduce": 0, "bn": 1, "expand": 1}


def _b0_module_key(prefix):
    parts = prefix.split(".")
    if parts[0] == "stem":
        return (0,)
    if parts[0] == "top":
        return (2,)
    block = int(parts[1])
    part = _PART_ORDER[parts[2]]
    leaf = _LEAF_ORDER[parts[3]] if parts[2] != "se" else (0 if parts[3] == "reduce" else 1)
    return (1, block, part, leaf)


def convert_keras_b0(h5_path, template):
    import os
    os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
    import tensorflow as tf

    model = tf.keras.applications.EfficientNetV2B0(
        weights=None, include_top=False, include_preprocessing=False,
        input_shape=(224, 224, 3))
    model.load_weights(str(h5_path))

    keras_tensors = []
    for layer in model.layers:
        kind = type(layer).__name__
        w = layer.get_weights()
        if not w:
            continue
        if kind == "Conv2D":
            keras_tensors.append(("conv", [torch.from_numpy(w[0]).permute(3, 2, 0, 1)]
                                  + [torch.from_numpy(t) for t in w[1:]]))
        elif kind == "DepthwiseConv2D":
            keras_tensors.append(("conv", [torch.from_numpy(w[0]).permute(2, 3, 0, 1)]))
        elif kind == "BatchNormalization":
            keras_tensors.append(("bn", [torch.from_numpy(t) for t in w]))
        else:
            raise SystemExit(f"unexpected Keras layer {layer.name} ({kind})")

    prefixes = sorted({k.rsplit(".", 1)[0] for k in template}, key=_b0_module_key)
    if len(prefixes) != len(keras_tensors):
        raise SystemExit(f"layer count mismatch: {len(prefixes)} vs {len(keras_tensors)}")
    state = {}
    for prefix, (kind, tensors) in zip(prefixes, keras_tensors):
        if kind == "conv":
            names = ["weight", "bias"][: len(tensors)]
        else:
            names = ["weight", "bias", "running_mean", "running_var"]
        for n, t in zip(names, tensors):
            key = f"{prefix}.{n}"
            if key not in template or tuple(template[key].shape) != tuple(t.shape):
                raise SystemExit(f"cannot place Keras tensor at {key} {tuple(t.shape)}")
            state[key] = t.contiguous().float()
        if kind == "bn":
            state[f"{prefix}.num_batches_tracked"] = torch.tensor(0, dtype=torch.int64)
    missing = set(template) - set(state)
    if missing:
        raise SystemExit(f"unfilled tensors: {sorted(missing)[:5]}")
    return state


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, type=pathlib.Path, help="weight store directory")
    parser.add_argument("--backbone", action="append", choices=sorted(TORCHVISION),
                        help="torchvision backbone to convert (repeatable; default all)")
    parser.add_argument("--random", action="store_true",
                        help="seed-initialized architectures instead of ImageNet weights")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--keras-b0", type=pathlib.Path,
                        help="Keras EfficientNetV2B0 weights (.h5) to map into EfficientNetV2.pt")
    parser.add_argument("--b0-template", type=pathlib.Path,
                        help="EfficientNetV2.pt written by `crackbench init-weights`, "
                             "supplying target names and shapes")
    parser.add_argument("--reference-input", type=pathlib.Path,
                        help="also write {name}.input and {name}.features tensors here")
    args = parser.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(args.seed)
    references = {}
    for name in args.backbone or sorted(TORCHVISION):
        model = build_torchvision(name, args.random)
        path = args.out / f"{name}.pt"
        torch.save(backbone_state(name, model), path)
        print(path)
        if args.reference_input:
            side = TORCHVISION[name][3]
            x = torch.randn(2, 3, side, side, generator=torch.Generator().manual_seed(7))
            references[f"{name}.input"] = x
            references[f"{name}.features"] = pooled_features(name, model, x)
    if args.reference_input:
        torch.save(references, args.reference_input)
        print(args.reference_input)

    if args.keras_b0:
        if not args.b0_template:
            parser.error("--keras-b0 needs --b0-template")
        template = torch.load(args.b0_template, weights_only=False)
        path = args.out / "EfficientNetV2.pt"
        torch.save(convert_keras_b0(args.keras_b0, template), path)
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
