from PIL import Image, ImageFilter

gray = Image.open("photo.png").convert("L")
gray.filter(ImageFilter.FIND_EDGES).save("edges.png")
