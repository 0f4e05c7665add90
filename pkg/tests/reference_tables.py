"""Published layer tables for the full-size networks: (name, S, C, learnables)."""

GENERATOR_ROWS = [
    ("in", 1, 100, 0),
    ("proj", 4, 1024, 413_696),
    ("labels", 1, 1, 0),
    ("emb", 4, 1, 604),
    ("cat", 1, 1025, 0),  # printed with S=1; its inputs and tconv1 both imply S=4
    ("tconv1", 8, 512, 2_624_512),
    ("bn1", 8, 512, 1024),
    ("relu1", 8, 512, 0),
    ("tconv2", 36, 256, 1_310_976),
    ("bn2", 36, 256, 512),
    ("relu2", 36, 256, 0),
    ("tconv3", 150, 128, 393_344),
    ("bn3", 150, 128, 256),
    ("relu3", 150, 128, 0),
    ("tconv4", 599, 64, 41_024),
    ("bn4", 599, 64, 128),
    ("relu4", 599, 64, 0),
    ("tconv5", 1201, 1, 449),
]

DISCRIMINATOR_ROWS = [
    ("in", 1201, 1, 0),
    ("labels", 1, 1, 0),
    ("emb", 1201, 1, 121_501),
    ("cat", 1201, 2, 0),
    ("conv1", 594, 512, 17_920),
    ("lrelu1", 594, 512, 0),
    ("conv2", 146, 256, 2_097_408),
    ("lrelu2", 146, 256, 0),
    ("conv3", 34, 128, 524_416),
    ("lrelu3", 34, 128, 0),
    ("conv4", 8, 64, 65_600),
    ("lrelu4", 8, 64, 0),
    ("conv5", 1, 1, 513),
]

# the one printed entry that contradicts its neighbours
KNOWN_MISPRINTS = {("generator", "cat"): {"S": 4}}
