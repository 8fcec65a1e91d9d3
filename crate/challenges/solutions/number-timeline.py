A = int(input())
B = int(input())
if A >= B:
    print("The first number must be smaller than the second")
else:
    for number in range(A, B+1):
        print(number, end=" ")
