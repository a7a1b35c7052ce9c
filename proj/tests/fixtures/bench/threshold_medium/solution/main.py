from PIL import Image

gray = Image.open("photo.png").convert("L")
mask = gray.point(lambda v: 255 if v >= 128 else 0)
mask.save("mask.png")
white = sum(1 for v in mask.getdata() if v == 255)
with open("count.txt", "w") as out:
    out.write(f"white_pixels={white}\n")
